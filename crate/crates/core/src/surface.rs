//! Conformally immersed tori in `H = R^4`: analytic generators, sampled input,
//! frame data (left/right normals and the mean curvature quaternion).
//!
//! The domain carries the complex structure `J d/dx = d/dy`, so for a 1-form
//! `w = w_x dx + w_y dy` the Hodge star is `*w = w_y dx - w_x dy`.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{signed_freq, Spectral};
use crate::quat::{Quaternion, C64};

/// Generators of the period lattice of `T^2 = C / Gamma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusLattice {
    pub tau1: C64,
    pub tau2: C64,
}

impl TorusLattice {
    pub fn new(tau1: C64, tau2: C64) -> Result<Self> {
        let l = TorusLattice { tau1, tau2 };
        if l.orientation().abs() < 1e-12 {
            return Err(Error::InvalidParams("degenerate lattice".into()));
        }
        Ok(l)
    }

    /// `Im(conj(tau1) tau2)`, the signed area of the fundamental domain.
    pub fn orientation(&self) -> f64 {
        (self.tau1.conj() * self.tau2).im
    }

    pub fn area(&self) -> f64 {
        self.orientation().abs()
    }

    /// Lattice coordinates to the Euclidean domain point `x + iy`.
    pub fn point(&self, s: f64, t: f64) -> (f64, f64) {
        let z = self.tau1 * s + self.tau2 * t;
        (z.re, z.im)
    }

    /// `integer combination a tau1 + b tau2`.
    pub fn generator(&self, a: i64, b: i64) -> C64 {
        self.tau1 * a as f64 + self.tau2 * b as f64
    }

    /// Coefficients `(cxs, cxt, cys, cyt)` with `d/dx = cxs d/ds + cxt d/dt`, `d/dy = cys d/ds + cyt d/dt`.
    pub fn xy_from_st(&self) -> (f64, f64, f64, f64) {
        let (a1, b1, a2, b2) = (self.tau1.re, self.tau1.im, self.tau2.re, self.tau2.im);
        let det = a1 * b2 - a2 * b1;
        (b2 / det, -b1 / det, -a2 / det, a1 / det)
    }
}

/// The value and first partials of an immersion at one point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub f: Quaternion,
    pub fx: Quaternion,
    pub fy: Quaternion,
}

type JetFn = dyn Fn(f64, f64) -> Jet + Send + Sync;

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceKind {
    Clifford,
    Homogeneous { r: f64 },
    Hopf { samples: usize },
    Hsl { beta: [f64; 2] },
    Sampled { n1: usize, n2: usize },
    /// The image under the Moebius swap `(a, b) -> (b, a)`, i.e. `f -> f^{-1}`.
    Inverted(Box<SurfaceKind>),
    /// The image under `f -> f - q`, `q` as `(w, x, y, z)`.
    Translated(Box<SurfaceKind>, [f64; 4]),
}

impl SurfaceKind {
    pub fn name(&self) -> String {
        match self {
            SurfaceKind::Clifford => "clifford".into(),
            SurfaceKind::Homogeneous { r } => format!("homogeneous(r={r})"),
            SurfaceKind::Hopf { samples } => format!("hopf({samples} samples)"),
            SurfaceKind::Hsl { beta } => format!("hsl(beta=({}, {}))", beta[0], beta[1]),
            SurfaceKind::Sampled { n1, n2 } => format!("sampled({n1}x{n2})"),
            SurfaceKind::Inverted(k) => format!("inverted({})", k.name()),
            SurfaceKind::Translated(k, q) => format!("translated({}, {:?})", k.name(), q),
        }
    }
}

#[derive(Clone)]
enum Model {
    Analytic(Arc<JetFn>),
    Sampled { n1: usize, n2: usize, f: Arc<Vec<Quaternion>> },
}

/// A torus immersion together with its period lattice.
#[derive(Clone)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub lattice: TorusLattice,
    model: Model,
}

impl std::fmt::Debug for SurfaceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceSpec").field("kind", &self.kind).field("lattice", &self.lattice).finish()
    }
}

/// Parameters of the built-in analytic families.
#[derive(Clone, Debug, PartialEq)]
pub enum BuiltinKind {
    Clifford,
    Homogeneous { r: f64 },
    /// Hopf torus over a closed curve on `S^2` given by samples at equally spaced parameter values.
    Hopf { curve: Vec<[f64; 3]> },
    /// Product torus with linear Lagrangian angle `beta1 x + beta2 y`.
    Hsl { beta: [f64; 2] },
}

pub fn builtin_surface(kind: &BuiltinKind) -> Result<SurfaceSpec> {
    match kind {
        BuiltinKind::Clifford => homogeneous(std::f64::consts::FRAC_1_SQRT_2, SurfaceKind::Clifford),
        BuiltinKind::Homogeneous { r } => {
            if !(*r > 0.0 && *r < 1.0) {
                return Err(Error::InvalidParams(format!("homogeneous torus needs r in (0,1), got {r}")));
            }
            homogeneous(*r, SurfaceKind::Homogeneous { r: *r })
        }
        BuiltinKind::Hopf { curve } => hopf_torus(curve),
        BuiltinKind::Hsl { beta } => {
            if beta.iter().any(|b| !b.is_finite() || b.abs() < 1e-12) {
                return Err(Error::InvalidParams("hsl angle covector needs nonzero components".into()));
            }
            let (r, s) = (1.0 / beta[0], 1.0 / beta[1]);
            let lattice = TorusLattice::new(C64::new(2.0 * PI * r.abs(), 0.0), C64::new(0.0, 2.0 * PI * s.abs()))?;
            Ok(SurfaceSpec {
                kind: SurfaceKind::Hsl { beta: *beta },
                lattice,
                model: Model::Analytic(Arc::new(move |x, y| product_jet(r, s, x, y))),
            })
        }
    }
}

/// `f = r e^{ix/r} + j s e^{iy/s}`.
fn product_jet(r: f64, s: f64, x: f64, y: f64) -> Jet {
    let a = C64::from_polar(1.0, x / r);
    let b = C64::from_polar(1.0, y / s);
    let i = C64::new(0.0, 1.0);
    Jet {
        f: Quaternion::from_split(a * r, b * s),
        fx: Quaternion::from_split(a * i, C64::new(0.0, 0.0)),
        fy: Quaternion::from_split(C64::new(0.0, 0.0), b * i),
    }
}

fn homogeneous(r: f64, kind: SurfaceKind) -> Result<SurfaceSpec> {
    let s = (1.0 - r * r).sqrt();
    let lattice = TorusLattice::new(C64::new(2.0 * PI * r, 0.0), C64::new(0.0, 2.0 * PI * s))?;
    Ok(SurfaceSpec { kind, lattice, model: Model::Analytic(Arc::new(move |x, y| product_jet(r, s, x, y))) })
}

impl SurfaceSpec {
    pub fn jet(&self, x: f64, y: f64) -> Option<Jet> {
        match &self.model {
            Model::Analytic(g) => Some(g(x, y)),
            Model::Sampled { .. } => None,
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self.model, Model::Analytic(_))
    }

    /// Sampled surface on an `n1 x n2` lattice-coordinate grid.
    pub fn sampled(lattice: TorusLattice, n1: usize, n2: usize, f: Vec<Quaternion>) -> Result<Self> {
        if f.len() != n1 * n2 {
            return Err(Error::InvalidParams(format!("expected {} samples, got {}", n1 * n2, f.len())));
        }
        if n1 < 4 || n2 < 4 {
            return Err(Error::InvalidParams("sampled grid too small".into()));
        }
        Ok(SurfaceSpec { kind: SurfaceKind::Sampled { n1, n2 }, lattice, model: Model::Sampled { n1, n2, f: Arc::new(f) } })
    }

    /// Image under `f -> f^{-1}`: the chart in which the old point `0` becomes `infinity`.
    pub fn inverted(&self) -> SurfaceSpec {
        let kind = SurfaceKind::Inverted(Box::new(self.kind.clone()));
        match &self.model {
            Model::Analytic(g) => {
                let g = g.clone();
                SurfaceSpec {
                    kind,
                    lattice: self.lattice,
                    model: Model::Analytic(Arc::new(move |x, y| {
                        let j = g(x, y);
                        let fi = j.f.inv();
                        Jet { f: fi, fx: -(fi * j.fx * fi), fy: -(fi * j.fy * fi) }
                    })),
                }
            }
            Model::Sampled { n1, n2, f } => SurfaceSpec {
                kind,
                lattice: self.lattice,
                model: Model::Sampled { n1: *n1, n2: *n2, f: Arc::new(f.iter().map(|q| q.inv()).collect()) },
            },
        }
    }

    /// Image under `f -> f - q`.
    pub fn translated(&self, q: Quaternion) -> SurfaceSpec {
        let kind = SurfaceKind::Translated(Box::new(self.kind.clone()), [q.w, q.x, q.y, q.z]);
        match &self.model {
            Model::Analytic(g) => {
                let g = g.clone();
                SurfaceSpec {
                    kind,
                    lattice: self.lattice,
                    model: Model::Analytic(Arc::new(move |x, y| {
                        let j = g(x, y);
                        Jet { f: j.f - q, ..j }
                    })),
                }
            }
            Model::Sampled { n1, n2, f } => SurfaceSpec {
                kind,
                lattice: self.lattice,
                model: Model::Sampled { n1: *n1, n2: *n2, f: Arc::new(f.iter().map(|p| *p - q).collect()) },
            },
        }
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SampledSurfaceFile = serde_json::from_str(text)?;
        file.into_spec()
    }
}

/// On-disk schema for sampled tori (also used for Darboux mesh export).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampledSurfaceFile {
    pub lattice: LatticeJson,
    pub dims: [usize; 2],
    pub f: Vec<[f64; 4]>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LatticeJson {
    pub tau1: [f64; 2],
    pub tau2: [f64; 2],
}

impl From<TorusLattice> for LatticeJson {
    fn from(l: TorusLattice) -> Self {
        LatticeJson { tau1: [l.tau1.re, l.tau1.im], tau2: [l.tau2.re, l.tau2.im] }
    }
}

impl SampledSurfaceFile {
    pub fn new(lattice: TorusLattice, n1: usize, n2: usize, f: &[Quaternion]) -> Self {
        SampledSurfaceFile { lattice: lattice.into(), dims: [n1, n2], f: f.iter().map(|q| [q.w, q.x, q.y, q.z]).collect() }
    }

    pub fn into_spec(self) -> Result<SurfaceSpec> {
        let lattice = TorusLattice::new(
            C64::new(self.lattice.tau1[0], self.lattice.tau1[1]),
            C64::new(self.lattice.tau2[0], self.lattice.tau2[1]),
        )?;
        let [n1, n2] = self.dims;
        let f = self.f.iter().map(|v| Quaternion::new(v[0], v[1], v[2], v[3])).collect();
        SurfaceSpec::sampled(lattice, n1, n2, f)
    }
}

/// Truncated Fourier series of a 1-periodic function.
#[derive(Clone, Debug)]
struct Trig1 {
    modes: Vec<(f64, C64)>,
}

impl Trig1 {
    fn from_samples(v: &[C64], keep_tol: f64) -> Trig1 {
        let n = v.len();
        let mut data = v.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut data);
        let modes = data
            .iter()
            .enumerate()
            .filter(|(k, c)| 2 * k != n && c.norm() / n as f64 > keep_tol)
            .map(|(k, c)| (signed_freq(k, n) as f64, c / n as f64))
            .collect();
        Trig1 { modes }
    }

    fn eval(&self, u: f64) -> (C64, C64) {
        let mut v = C64::new(0.0, 0.0);
        let mut d = C64::new(0.0, 0.0);
        for &(k, c) in &self.modes {
            let e = c * C64::from_polar(1.0, 2.0 * PI * k * u);
            v += e;
            d += e * C64::new(0.0, 2.0 * PI * k);
        }
        (v, d)
    }

    fn mean(&self) -> C64 {
        self.modes.iter().filter(|(k, _)| *k == 0.0).map(|(_, c)| *c).sum()
    }

    /// Antiderivative of the zero-mean part.
    fn integral_periodic(&self, u: f64) -> f64 {
        self.modes
            .iter()
            .filter(|(k, _)| *k != 0.0)
            .map(|&(k, c)| (c * C64::from_polar(1.0, 2.0 * PI * k * u) / C64::new(0.0, 2.0 * PI * k)).re)
            .sum()
    }
}

struct SphereCurve {
    comps: [Trig1; 3],
}

impl SphereCurve {
    /// Unit point and its parameter derivative.
    fn eval(&self, u: f64) -> (Quaternion, Quaternion) {
        let mut v = [0.0; 3];
        let mut d = [0.0; 3];
        for k in 0..3 {
            let (a, b) = self.comps[k].eval(u);
            v[k] = a.re;
            d[k] = b.re;
        }
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let p = [v[0] / n, v[1] / n, v[2] / n];
        let pd: f64 = p[0] * d[0] + p[1] * d[1] + p[2] * d[2];
        let dd = [(d[0] - pd * p[0]) / n, (d[1] - pd * p[1]) / n, (d[2] - pd * p[2]) / n];
        (Quaternion::from_imag(p), Quaternion::from_imag(dd))
    }
}

/// Unit quaternion `q` with `q a q^{-1} = b` for unit imaginary `a`, `b`.
fn rotation_taking(a: Quaternion, b: Quaternion) -> Quaternion {
    let q = Quaternion::ONE - b * a;
    if q.norm() < 1e-8 {
        // b = -a: any unit imaginary orthogonal to a
        let t = if a.x.abs() < 0.9 { Quaternion::I } else { Quaternion::J };
        let o = (t - a.scale(a.dot(t))).im();
        return o.scale(1.0 / o.norm());
    }
    q.scale(1.0 / q.norm())
}

/// Hopf torus: preimage of a closed curve under `q -> q i q^{-1}`, parametrized
/// conformally by half arc length along the horizontal lift and the fibre angle.
fn hopf_torus(curve: &[[f64; 3]]) -> Result<SurfaceSpec> {
    let k = curve.len();
    if k < 8 {
        return Err(Error::InvalidParams("hopf curve needs at least 8 samples".into()));
    }
    let unit: Vec<[f64; 3]> = curve
        .iter()
        .map(|p| {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            [p[0] / n, p[1] / n, p[2] / n]
        })
        .collect();
    let dist = |a: &[f64; 3], b: &[f64; 3]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    let mut steps: Vec<f64> = (0..k - 1).map(|i| dist(&unit[i], &unit[i + 1])).collect();
    let closing = dist(&unit[k - 1], &unit[0]);
    steps.sort_by(|a, b| a.total_cmp(b));
    let median = steps[steps.len() / 2];
    if closing > 3.0 * median.max(1e-12) || closing < 1e-14 {
        return Err(Error::InvalidParams(format!(
            "hopf curve not closed: closing step {closing:.3e}, median step {median:.3e}"
        )));
    }
    let comps = [0, 1, 2].map(|c| {
        let v: Vec<C64> = unit.iter().map(|p| C64::new(p[c], 0.0)).collect();
        Trig1::from_samples(&v, 0.0)
    });
    let gamma = SphereCurve { comps };

    // speed, arc length and the horizontal lift c' = 1/2 gamma gamma_u c on a fine grid
    let m = (16 * k).max(2048);
    let speed: Vec<C64> = (0..m).map(|i| C64::new(gamma.eval(i as f64 / m as f64).1.norm(), 0.0)).collect();
    let speed = Trig1::from_samples(&speed, 1e-15);
    let length = speed.mean().re;

    let gen = |u: f64| {
        let (g, gu) = gamma.eval(u);
        (g * gu).scale(0.5)
    };
    let (g0, _) = gamma.eval(0.0);
    let mut c = rotation_taking(Quaternion::I, g0);
    let h = 1.0 / m as f64;
    let mut lift = Vec::with_capacity(m + 1);
    lift.push(c);
    for i in 0..m {
        let u = i as f64 * h;
        let (x0, xm, x1) = (gen(u), gen(u + 0.5 * h), gen(u + h));
        let k1 = x0 * c;
        let k2 = xm * (c + k1.scale(0.5 * h));
        let k3 = xm * (c + k2.scale(0.5 * h));
        let k4 = x1 * (c + k3.scale(h));
        c += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(h / 6.0);
        lift.push(c);
    }
    let hol = lift[0].inv() * lift[m];
    let phi = hol.x.atan2(hol.w);
    let periodic: Vec<[C64; 4]> = (0..m)
        .map(|i| {
            let q = lift[i] * Quaternion::expi(-phi * i as f64 / m as f64);
            [q.w, q.x, q.y, q.z].map(|v| C64::new(v, 0.0))
        })
        .collect();
    let pcomps: [Trig1; 4] = [0, 1, 2, 3].map(|c| {
        let v: Vec<C64> = periodic.iter().map(|q| q[c]).collect();
        Trig1::from_samples(&v, 1e-15)
    });

    let lattice = TorusLattice::new(C64::new(0.5 * length, -phi), C64::new(0.0, 2.0 * PI))?;
    let jet = move |x: f64, y: f64| {
        // arc length 2x -> curve parameter u by Newton on s(u) = L u + periodic part
        let target = 2.0 * x;
        let mut u = target / length;
        for _ in 0..50 {
            let s = length * u + speed.integral_periodic(u);
            let ds = speed.eval(u).0.re;
            let du = (s - target) / ds;
            u -= du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        let p = {
            let v: Vec<f64> = pcomps.iter().map(|t| t.eval(u).0.re).collect();
            Quaternion::new(v[0], v[1], v[2], v[3])
        };
        let cu = p * Quaternion::expi(phi * u);
        let cu = cu.scale(1.0 / cu.norm());
        let (g, gu) = gamma.eval(u);
        let gs = gu.scale(1.0 / gu.norm());
        let e = Quaternion::expi(y);
        Jet { f: cu * e, fx: g * gs * cu * e, fy: cu * Quaternion::I * e }
    };
    Ok(SurfaceSpec { kind: SurfaceKind::Hopf { samples: k }, lattice, model: Model::Analytic(Arc::new(jet)) })
}

/// Samples of a closed curve on `S^2`: latitude circle at polar angle `theta` from the `i` axis.
pub fn latitude_circle(theta: f64, samples: usize) -> Vec<[f64; 3]> {
    (0..samples)
        .map(|k| {
            let u = 2.0 * PI * k as f64 / samples as f64;
            [theta.cos(), theta.sin() * u.cos(), theta.sin() * u.sin()]
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct FrameOptions {
    /// Points with `|f_x|` below this fraction of the maximum are masked.
    pub immersion_threshold: f64,
    /// Largest admitted normalized conformality residual.
    pub conformal_tol: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        FrameOptions { immersion_threshold: 1e-6, conformal_tol: 1e-6 }
    }
}

/// Sampled immersion with normals, mean curvature quaternion and first derivatives of all of them.
#[derive(Clone, Debug)]
pub struct FrameGrid {
    pub n1: usize,
    pub n2: usize,
    pub lattice: TorusLattice,
    pub spectral: Spectral,
    pub f: Vec<Quaternion>,
    pub fx: Vec<Quaternion>,
    pub fy: Vec<Quaternion>,
    /// Left normal, `*df = N df`.
    pub n: Vec<Quaternion>,
    /// Right normal, `*df = -df R`.
    pub r: Vec<Quaternion>,
    /// Mean curvature quaternion `H` with `dN' = -df H`.
    pub h: Vec<Quaternion>,
    pub nx: Vec<Quaternion>,
    pub ny: Vec<Quaternion>,
    pub rx: Vec<Quaternion>,
    pub ry: Vec<Quaternion>,
    pub hx: Vec<Quaternion>,
    pub hy: Vec<Quaternion>,
    pub conf_res: Vec<f64>,
    pub mask: Vec<bool>,
}

impl FrameGrid {
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        (i % self.n1) * self.n2 + (j % self.n2)
    }

    /// Lattice coordinates of grid point `(i, j)`.
    pub fn st(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 / self.n1 as f64, j as f64 / self.n2 as f64)
    }

    pub fn cell_area(&self) -> f64 {
        self.lattice.area() / (self.n1 * self.n2) as f64
    }

    pub fn masked_points(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn max_conformal_residual(&self) -> f64 {
        self.conf_res.iter().zip(&self.mask).filter(|(_, m)| !**m).map(|(c, _)| *c).fold(0.0, f64::max)
    }

    /// `(d/dx, d/dy)` of a quaternion field by trigonometric differentiation.
    pub fn deriv(&self, field: &[Quaternion]) -> (Vec<Quaternion>, Vec<Quaternion>) {
        quat_deriv(&self.spectral, &self.lattice, field)
    }

    /// Mean curvature of a torus in the unit 3-sphere, `H f + R`, one value per point.
    pub fn sphere_mean_curvature(&self) -> Vec<Quaternion> {
        (0..self.len()).map(|k| self.h[k] * self.f[k] + self.r[k]).collect()
    }
}

pub fn quat_deriv(sp: &Spectral, lattice: &TorusLattice, field: &[Quaternion]) -> (Vec<Quaternion>, Vec<Quaternion>) {
    let (cxs, cxt, cys, cyt) = lattice.xy_from_st();
    let (a, b): (Vec<C64>, Vec<C64>) = field.iter().map(|q| q.split()).unzip();
    let (as_, at) = sp.deriv_st(&a);
    let (bs, bt) = sp.deriv_st(&b);
    let n = field.len();
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for k in 0..n {
        dx.push(Quaternion::from_split(as_[k] * cxs + at[k] * cxt, bs[k] * cxs + bt[k] * cxt));
        dy.push(Quaternion::from_split(as_[k] * cys + at[k] * cyt, bs[k] * cys + bt[k] * cyt));
    }
    (dx, dy)
}

/// Trigonometric resampling of a quaternion field from one periodic grid to another.
pub fn resample(field: &[Quaternion], from: (usize, usize), to: (usize, usize)) -> Vec<Quaternion> {
    if from == to {
        return field.to_vec();
    }
    let src = Spectral::new(from.0, from.1);
    let dst = Spectral::new(to.0, to.1);
    let mut comps = Vec::new();
    for part in 0..2 {
        let v: Vec<C64> = field.iter().map(|q| if part == 0 { q.split().0 } else { q.split().1 }).collect();
        let c = src.forward(&v);
        let mut out = vec![C64::new(0.0, 0.0); to.0 * to.1];
        for i in 0..from.0 {
            for j in 0..from.1 {
                for (f1, w1) in nyquist_split(i, from.0) {
                    for (f2, w2) in nyquist_split(j, from.1) {
                        let (Some(a), Some(b)) = (fold(f1, to.0), fold(f2, to.1)) else { continue };
                        out[a * to.1 + b] += c[i * from.1 + j] * (w1 * w2);
                    }
                }
            }
        }
        comps.push(dst.inverse(&out));
    }
    (0..to.0 * to.1).map(|k| Quaternion::from_split(comps[0][k], comps[1][k])).collect()
}

fn nyquist_split(k: usize, n: usize) -> Vec<(i64, f64)> {
    let f = signed_freq(k, n);
    if n.is_multiple_of(2) && 2 * k == n {
        vec![(f, 0.5), (-f, 0.5)]
    } else {
        vec![(f, 1.0)]
    }
}

fn fold(f: i64, n: usize) -> Option<usize> {
    if 2 * f.unsigned_abs() as usize > n {
        None
    } else {
        Some(f.rem_euclid(n as i64) as usize)
    }
}

/// Fills the frame data of `spec` on an `n1 x n2` lattice-coordinate grid.
pub fn sample_frames(spec: &SurfaceSpec, n1: usize, n2: usize) -> Result<FrameGrid> {
    sample_frames_with(spec, n1, n2, &FrameOptions::default())
}

pub fn sample_frames_with(spec: &SurfaceSpec, n1: usize, n2: usize, opts: &FrameOptions) -> Result<FrameGrid> {
    if n1 < 8 || n2 < 8 {
        return Err(Error::InvalidParams(format!("grid {n1}x{n2} too small (need >= 8)")));
    }
    let lattice = spec.lattice;
    let spectral = Spectral::new(n1, n2);
    let total = n1 * n2;
    let (f, fx, fy) = match &spec.model {
        Model::Analytic(g) => {
            let jets: Vec<Jet> = (0..total)
                .into_par_iter()
                .map(|k| {
                    let (s, t) = ((k / n2) as f64 / n1 as f64, (k % n2) as f64 / n2 as f64);
                    let (x, y) = lattice.point(s, t);
                    g(x, y)
                })
                .collect();
            (jets.iter().map(|j| j.f).collect::<Vec<_>>(), jets.iter().map(|j| j.fx).collect(), jets.iter().map(|j| j.fy).collect())
        }
        Model::Sampled { n1: m1, n2: m2, f } => {
            let f = resample(f, (*m1, *m2), (n1, n2));
            let (fx, fy) = quat_deriv(&spectral, &lattice, &f);
            (f, fx, fy)
        }
    };

    let scale = fx.iter().chain(&fy).map(|q| q.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::NonImmersed { count: total, total, points: vec![] });
    }
    let mask: Vec<bool> = (0..total).map(|k| fx[k].norm() < opts.immersion_threshold * scale).collect();
    let masked: Vec<(usize, usize)> = (0..total).filter(|&k| mask[k]).map(|k| (k / n2, k % n2)).collect();
    if masked.len() * 100 >= total {
        return Err(Error::NonImmersed { count: masked.len(), total, points: masked });
    }

    let conf_res: Vec<f64> = (0..total)
        .map(|k| {
            let (a, b) = (fx[k].norm_sqr(), fy[k].norm_sqr());
            if a + b == 0.0 {
                return 0.0;
            }
            ((a - b).abs() + 2.0 * fx[k].dot(fy[k]).abs()) / (a + b)
        })
        .collect();
    let max_conf = (0..total).filter(|&k| !mask[k]).map(|k| conf_res[k]).fold(0.0, f64::max);
    if max_conf > opts.conformal_tol {
        return Err(Error::NonConformal { max: max_conf, tol: opts.conformal_tol });
    }

    let (n, r): (Vec<Quaternion>, Vec<Quaternion>) = (0..total)
        .map(|k| {
            if mask[k] {
                return (Quaternion::I, Quaternion::I);
            }
            let fxi = fx[k].inv();
            (fy[k] * fxi, -(fxi * fy[k]))
        })
        .unzip();
    let (nx, ny) = quat_deriv(&spectral, &lattice, &n);
    let (rx, ry) = quat_deriv(&spectral, &lattice, &r);
    let h: Vec<Quaternion> = (0..total)
        .map(|k| {
            if mask[k] {
                return Quaternion::ZERO;
            }
            // dN'(d/dx) = (N_x - N N_y) / 2 = -f_x H
            -(fx[k].inv() * (nx[k] - n[k] * ny[k]).scale(0.5))
        })
        .collect();
    let (hx, hy) = quat_deriv(&spectral, &lattice, &h);
    Ok(FrameGrid { n1, n2, lattice, spectral, f, fx, fy, n, r, h, nx, ny, rx, ry, hx, hy, conf_res, mask })
}

/// Degree of a map into the unit 2-sphere of imaginary quaternions, by summing
/// signed solid angles of the triangulated grid. Returns `(degree, drift)`.
pub fn degree(field: &[Quaternion], n1: usize, n2: usize, lattice: &TorusLattice) -> Result<(i64, f64)> {
    let v: Vec<[f64; 3]> = field
        .iter()
        .map(|q| {
            let a = q.imag_vec();
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            [a[0] / n, a[1] / n, a[2] / n]
        })
        .collect();
    let at = |i: usize, j: usize| &v[(i % n1) * n2 + (j % n2)];
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let triple = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]| {
        a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
    };
    let solid = |a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]| 2.0 * triple(a, b, c).atan2(1.0 + dot(a, b) + dot(b, c) + dot(c, a));
    let mut total = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            let (p00, p10, p01, p11) = (at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1));
            for (a, b) in [(p00, p10), (p00, p01)] {
                if dot(a, b) < 0.0 {
                    return Err(Error::InsufficientResolution { drift: 0.5 });
                }
            }
            total += solid(p00, p10, p11) + solid(p00, p11, p01);
        }
    }
    let value = total / (4.0 * PI) * lattice.orientation().signum();
    let deg = value.round();
    let drift = (value - deg).abs();
    if drift > 0.1 {
        return Err(Error::InsufficientResolution { drift });
    }
    Ok((deg as i64, drift))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clifford() -> SurfaceSpec {
        builtin_surface(&BuiltinKind::Clifford).unwrap()
    }

    #[test]
    fn clifford_origin_value() {
        let j = clifford().jet(0.0, 0.0).unwrap();
        let want = Quaternion::new(1.0, 0.0, 1.0, 0.0).scale(std::f64::consts::FRAC_1_SQRT_2);
        assert!((j.f - want).norm() < 1e-15);
    }

    #[test]
    fn homogeneous_has_unit_speed() {
        let spec = builtin_surface(&BuiltinKind::Homogeneous { r: 0.6 }).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, 1.7), (2.0, -0.4)] {
            let j = spec.jet(x, y).unwrap();
            assert!((j.fx.norm() - 1.0).abs() < 1e-14 && (j.fy.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_params() {
        assert!(builtin_surface(&BuiltinKind::Homogeneous { r: 1.2 }).is_err());
        assert!(builtin_surface(&BuiltinKind::Hsl { beta: [0.0, 1.0] }).is_err());
        let mut open = latitude_circle(1.0, 32);
        open.truncate(20);
        assert!(matches!(builtin_surface(&BuiltinKind::Hopf { curve: open }), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn clifford_normals_closed_form() {
        let fg = sample_frames(&clifford(), 16, 16).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..16 {
            for j in 0..16 {
                let k = fg.idx(i, j);
                let (s, t) = fg.st(i, j);
                let (x, y) = fg.lattice.point(s, t);
                let nn = Quaternion::J * Quaternion::expi(y / r - x / r);
                let rr = Quaternion::J * Quaternion::expi(x / r + y / r);
                assert!((fg.n[k] - nn).norm() < 1e-13);
                assert!((fg.r[k] - rr).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn clifford_sphere_mean_curvature_vanishes() {
        let fg = sample_frames(&clifford(), 16, 16).unwrap();
        for q in fg.sphere_mean_curvature() {
            assert!(q.norm() < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn homogeneous_sphere_mean_curvature_is_constant() {
        let r: f64 = 0.6;
        let s = (1.0 - r * r).sqrt();
        let spec = builtin_surface(&BuiltinKind::Homogeneous { r }).unwrap();
        let fg = sample_frames(&spec, 16, 16).unwrap();
        let want = (s / r - r / s) / 2.0;
        for q in fg.sphere_mean_curvature() {
            assert!(q.im().norm() < 1e-12);
            assert!((q.w.abs() - want.abs()).abs() < 1e-12, "{} vs {}", q.w, want);
        }
    }

    #[test]
    fn constant_map_is_not_immersed() {
        let l = TorusLattice::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)).unwrap();
        let spec = SurfaceSpec::sampled(l, 8, 8, vec![Quaternion::ONE; 64]).unwrap();
        assert!(matches!(sample_frames(&spec, 8, 8), Err(Error::NonImmersed { .. })));
    }

    #[test]
    fn frame_relations_hold() {
        for spec in [clifford(), builtin_surface(&BuiltinKind::Hsl { beta: [1.0, 2.0] }).unwrap()] {
            let fg = sample_frames(&spec, 64, 64).unwrap();
            for k in 0..fg.len() {
                assert!((fg.n[k].norm() - 1.0).abs() < 1e-10 && (fg.r[k].norm() - 1.0).abs() < 1e-10);
                let s = fg.fx[k].norm();
                assert!((fg.fy[k] - fg.n[k] * fg.fx[k]).norm() < 1e-9 * s);
                assert!((fg.fy[k] + fg.fx[k] * fg.r[k]).norm() < 1e-9 * s);
            }
        }
    }

    #[test]
    fn hsl_right_normal_has_linear_angle() {
        let spec = builtin_surface(&BuiltinKind::Hsl { beta: [1.0, 1.0] }).unwrap();
        let fg = sample_frames(&spec, 16, 16).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let (s, t) = fg.st(i, j);
                let (x, y) = fg.lattice.point(s, t);
                let want = Quaternion::J * Quaternion::expi(x + y);
                assert!((fg.r[fg.idx(i, j)] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn finite_differences_converge_at_second_order() {
        let spec = builtin_surface(&BuiltinKind::Homogeneous { r: 0.6 }).unwrap();
        let (x0, y0) = (0.37, 1.21);
        let exact = spec.jet(x0, y0).unwrap();
        let errs: Vec<f64> = [0.02, 0.01, 0.005]
            .iter()
            .map(|&h| {
                let fd = (spec.jet(x0 + h, y0).unwrap().f - spec.jet(x0 - h, y0).unwrap().f).scale(0.5 / h);
                (fd - exact.fx).norm()
            })
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
        }
    }

    #[test]
    fn sampled_roundtrip_through_json() {
        let fg = sample_frames(&clifford(), 16, 16).unwrap();
        let file = SampledSurfaceFile::new(fg.lattice, 16, 16, &fg.f);
        let text = serde_json::to_string(&file).unwrap();
        let spec = SurfaceSpec::from_json(&text).unwrap();
        let fg2 = sample_frames(&spec, 16, 16).unwrap();
        for k in 0..fg.len() {
            assert!((fg.n[k] - fg2.n[k]).norm() < 1e-10);
            assert!((fg.h[k] - fg2.h[k]).norm() < 1e-9);
        }
        let fg3 = sample_frames(&spec, 32, 32).unwrap();
        assert!(fg3.max_conformal_residual() < 1e-10);
    }

    #[test]
    fn sampled_length_is_validated() {
        let text = r#"{"lattice":{"tau1":[1,0],"tau2":[0,1]},"dims":[8,8],"f":[[0,0,0,0]]}"#;
        assert!(matches!(SurfaceSpec::from_json(text), Err(Error::InvalidParams(_))));
        assert!(SurfaceSpec::from_json("{not json").is_err());
    }

    #[test]
    fn hopf_torus_over_latitude_is_conformal_and_cmc() {
        let spec = builtin_surface(&BuiltinKind::Hopf { curve: latitude_circle(1.1, 64) }).unwrap();
        let fg = sample_frames(&spec, 32, 32).unwrap();
        assert!(fg.max_conformal_residual() < 1e-9);
        let hs = fg.sphere_mean_curvature();
        let h0 = hs[0].w;
        for q in hs {
            assert!(q.im().norm() < 1e-8 && (q.w - h0).abs() < 1e-8);
        }
        for q in &fg.f {
            assert!((q.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degrees() {
        let fg = sample_frames(&clifford(), 32, 32).unwrap();
        assert_eq!(degree(&fg.n, 32, 32, &fg.lattice).unwrap().0, 0);
        assert_eq!(degree(&fg.r, 32, 32, &fg.lattice).unwrap().0, 0);
        let l = TorusLattice::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)).unwrap();
        assert_eq!(degree(&vec![Quaternion::K; 64], 8, 8, &l).unwrap(), (0, 0.0));
        let n = 48;
        let field = synthetic_degree_one(n);
        let (d, drift) = degree(&field, n, n, &l).unwrap();
        assert_eq!(d, 1);
        assert!(drift < 1e-9);
    }

    /// Collapses the complement of a disc to the south pole and wraps the disc once around S^2.
    pub(crate) fn synthetic_degree_one(n: usize) -> Vec<Quaternion> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (i as f64 / n as f64 - 0.5, j as f64 / n as f64 - 0.5);
                let rho = (x * x + y * y).sqrt() / 0.45;
                let polar = if rho >= 1.0 { PI } else { PI * rho };
                let az = y.atan2(x);
                out.push(Quaternion::from_imag([polar.cos(), polar.sin() * az.cos(), polar.sin() * az.sin()]));
            }
        }
        out
    }
}
