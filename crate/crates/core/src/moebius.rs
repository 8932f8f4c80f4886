//! Mean curvature sphere congruence, Hopf fields, Lagrange multipliers and the
//! Willmore functional, all in the Euclidean chart `L = (f, 1)^T H`.
//!
//! 1-forms are stored by their `dx` and `dy` components. Alongside `A` and `Q`
//! we keep `B = 2*A` and `C = 2*Q`; the forms themselves are recovered by
//! `A = -1/2 *B`, i.e. `A_x = -B_y / 2`, `A_y = B_x / 2`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quat::{QMat2, QVec2, Quaternion};
use crate::surface::{degree, quat_deriv, FrameGrid, TorusLattice};

#[derive(Clone, Debug)]
pub struct SphereCongruenceGrid {
    pub s: Vec<QMat2>,
}

#[derive(Clone, Debug)]
pub struct HopfGrid {
    pub n1: usize,
    pub n2: usize,
    pub lattice: TorusLattice,
    pub ax: Vec<QMat2>,
    pub ay: Vec<QMat2>,
    pub qx: Vec<QMat2>,
    pub qy: Vec<QMat2>,
    pub bx: Vec<QMat2>,
    pub by: Vec<QMat2>,
    pub cx: Vec<QMat2>,
    pub cy: Vec<QMat2>,
    pub wx: Vec<Quaternion>,
    pub wy: Vec<Quaternion>,
    pub mask: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Ambient {
    R3,
    S3,
}

/// Choice of the Lagrange multiplier `eta` in `d(2*A + eta) = 0`.
#[derive(Clone, Debug)]
pub enum EtaPolicy {
    Zero,
    /// The closed-form families of CMC tori.
    CmcRho { rho: f64, ambient: Ambient },
    /// `im(Q_circ) = infinity`; requires a harmonic left normal.
    HarmonicLeft,
    /// `ker(A_circ)` contains `infinity`; requires a harmonic right normal.
    HarmonicRight,
    Custom { eta_x: Vec<QMat2>, eta_y: Vec<QMat2> },
}

impl EtaPolicy {
    pub fn name(&self) -> String {
        match self {
            EtaPolicy::Zero => "zero".into(),
            EtaPolicy::CmcRho { rho, ambient } => format!("cmc:{rho}:{ambient:?}"),
            EtaPolicy::HarmonicLeft => "harmonic-left".into(),
            EtaPolicy::HarmonicRight => "harmonic-right".into(),
            EtaPolicy::Custom { .. } => "custom".into(),
        }
    }
}

/// The modified Hopf fields `A_circ`, `Q_circ` and their stars `B = 2*A_circ`, `C = 2*Q_circ`.
#[derive(Clone, Debug)]
pub struct CircleGrid {
    pub n1: usize,
    pub n2: usize,
    pub lattice: TorusLattice,
    pub ax: Vec<QMat2>,
    pub ay: Vec<QMat2>,
    pub qx: Vec<QMat2>,
    pub qy: Vec<QMat2>,
    pub bx: Vec<QMat2>,
    pub by: Vec<QMat2>,
    pub cx: Vec<QMat2>,
    pub cy: Vec<QMat2>,
    pub mask: Vec<bool>,
}

impl CircleGrid {
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds the grid from `B = 2*A_circ` and `C = 2*Q_circ`.
    pub fn from_stars(
        n1: usize,
        n2: usize,
        lattice: TorusLattice,
        (bx, by): (Vec<QMat2>, Vec<QMat2>),
        (cx, cy): (Vec<QMat2>, Vec<QMat2>),
        mask: Vec<bool>,
    ) -> Self {
        let ax = by.iter().map(|b| b.scale(-0.5)).collect();
        let ay = bx.iter().map(|b| b.scale(0.5)).collect();
        let qx = cy.iter().map(|c| c.scale(-0.5)).collect();
        let qy = cx.iter().map(|c| c.scale(0.5)).collect();
        CircleGrid { n1, n2, lattice, ax, ay, qx, qy, bx, by, cx, cy, mask }
    }

    /// A grid with `A_circ = Q_circ = 0`.
    pub fn zero(n1: usize, n2: usize, lattice: TorusLattice) -> Self {
        let z = vec![QMat2::ZERO; n1 * n2];
        Self::from_stars(n1, n2, lattice, (z.clone(), z.clone()), (z.clone(), z), vec![false; n1 * n2])
    }
}

fn chart(f: Quaternion, a: Quaternion, b: Quaternion, c: Quaternion, d: Quaternion) -> QMat2 {
    QMat2::new(a, b, c, d).ad_chart(f)
}

pub fn mean_curvature_sphere(fg: &FrameGrid) -> SphereCongruenceGrid {
    let s = (0..fg.len())
        .into_par_iter()
        .map(|k| {
            if fg.mask[k] {
                return QMat2::ZERO;
            }
            chart(fg.f[k], fg.n[k], Quaternion::ZERO, fg.h[k], -fg.r[k])
        })
        .collect();
    SphereCongruenceGrid { s }
}

/// `dX'' = (dX + X *dX) / 2` for a unit imaginary field `X`.
pub fn holo_part(x: Quaternion, xx: Quaternion, xy: Quaternion) -> (Quaternion, Quaternion) {
    ((xx + x * xy).scale(0.5), (xy - x * xx).scale(0.5))
}

/// `dX' = (dX - X *dX) / 2`.
pub fn antiholo_part(x: Quaternion, xx: Quaternion, xy: Quaternion) -> (Quaternion, Quaternion) {
    ((xx - x * xy).scale(0.5), (xy + x * xx).scale(0.5))
}

/// Chart-local ingredients `dN''`, `dR''`, `dH` and `w` at one point.
#[derive(Clone, Copy, Debug)]
pub struct ChartForms {
    pub dn2: (Quaternion, Quaternion),
    pub dr2: (Quaternion, Quaternion),
    pub dh: (Quaternion, Quaternion),
    pub w: (Quaternion, Quaternion),
}

pub fn chart_forms(fg: &FrameGrid, k: usize) -> ChartForms {
    let dn2 = holo_part(fg.n[k], fg.nx[k], fg.ny[k]);
    let dr2 = holo_part(fg.r[k], fg.rx[k], fg.ry[k]);
    let (r, h) = (fg.r[k], fg.h[k]);
    let (hx, hy) = (fg.hx[k], fg.hy[k]);
    // w = (-dH - R*dH + H*dN'') / 2 with *w = (w_y, -w_x)
    let wx = (-hx - r * hy + h * dn2.1).scale(0.5);
    let wy = (-hy + r * hx - h * dn2.0).scale(0.5);
    ChartForms { dn2, dr2, dh: (hx, hy), w: (wx, wy) }
}

pub fn hopf_fields(fg: &FrameGrid, _sg: &SphereCongruenceGrid) -> HopfGrid {
    let z = Quaternion::ZERO;
    let per: Vec<[QMat2; 4]> = (0..fg.len())
        .into_par_iter()
        .map(|k| {
            if fg.mask[k] {
                return [QMat2::ZERO; 4];
            }
            let c = chart_forms(fg, k);
            let f = fg.f[k];
            [
                chart(f, z, z, c.w.0, c.dr2.0),
                chart(f, z, z, c.w.1, c.dr2.1),
                chart(f, c.dn2.0, z, c.w.0 + c.dh.0, z),
                chart(f, c.dn2.1, z, c.w.1 + c.dh.1, z),
            ]
        })
        .collect();
    let bx: Vec<QMat2> = per.iter().map(|p| p[0]).collect();
    let by: Vec<QMat2> = per.iter().map(|p| p[1]).collect();
    let cx: Vec<QMat2> = per.iter().map(|p| p[2]).collect();
    let cy: Vec<QMat2> = per.iter().map(|p| p[3]).collect();
    let (wx, wy): (Vec<Quaternion>, Vec<Quaternion>) = (0..fg.len())
        .map(|k| if fg.mask[k] { (z, z) } else { chart_forms(fg, k).w })
        .unzip();
    HopfGrid {
        n1: fg.n1,
        n2: fg.n2,
        lattice: fg.lattice,
        ax: by.iter().map(|b| b.scale(-0.5)).collect(),
        ay: bx.iter().map(|b| b.scale(0.5)).collect(),
        qx: cy.iter().map(|c| c.scale(-0.5)).collect(),
        qy: cx.iter().map(|c| c.scale(0.5)).collect(),
        bx,
        by,
        cx,
        cy,
        wx,
        wy,
        mask: fg.mask.clone(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CmcOptions {
    /// Admitted drift of the mean curvature from a constant.
    pub tol: f64,
}

impl Default for CmcOptions {
    fn default() -> Self {
        CmcOptions { tol: 1e-6 }
    }
}

/// Mean curvature of a torus in the unit 3-sphere, validated to be a real constant.
pub fn validate_cmc_s3(fg: &FrameGrid, tol: f64) -> Result<f64> {
    let hs = fg.sphere_mean_curvature();
    let live: Vec<&Quaternion> = hs.iter().zip(&fg.mask).filter(|(_, m)| !**m).map(|(h, _)| h).collect();
    let mean = live.iter().map(|q| q.w).sum::<f64>() / live.len() as f64;
    let radius = fg.f.iter().map(|q| (q.norm() - 1.0).abs()).fold(0.0, f64::max);
    let drift = live.iter().map(|q| (**q - Quaternion::real(mean)).norm()).fold(radius, f64::max);
    if drift > tol * mean.abs().max(1.0) {
        return Err(Error::NotCmc { drift });
    }
    Ok(mean)
}

/// Mean curvature of a torus in the 3-space `Im H`, validated to be a real constant.
pub fn validate_cmc_r3(fg: &FrameGrid, tol: f64) -> Result<f64> {
    let live: Vec<usize> = (0..fg.len()).filter(|&k| !fg.mask[k]).collect();
    let mean = live.iter().map(|&k| fg.h[k].w).sum::<f64>() / live.len() as f64;
    let drift = live
        .iter()
        .map(|&k| (fg.h[k] - Quaternion::real(mean)).norm().max(fg.f[k].w.abs()))
        .fold(0.0, f64::max);
    if drift > tol * mean.abs().max(1.0) {
        return Err(Error::NotCmc { drift });
    }
    Ok(mean)
}

/// Largest violation of `im(eta) in L in ker(eta)` and `*eta = S eta = eta S`.
pub fn eta_residual(eta_x: &[QMat2], eta_y: &[QMat2], fg: &FrameGrid, sg: &SphereCongruenceGrid) -> f64 {
    (0..fg.len())
        .filter(|&k| !fg.mask[k])
        .map(|k| {
            let f = fg.f[k];
            let s = sg.s[k];
            let mut r: f64 = 0.0;
            for e in [eta_x[k], eta_y[k]] {
                // in the adapted frame eta must be strictly lower-left
                let local = QMat2::new(Quaternion::ONE, -f, Quaternion::ZERO, Quaternion::ONE)
                    * e
                    * QMat2::new(Quaternion::ONE, f, Quaternion::ZERO, Quaternion::ONE);
                r = r.max(local.m[0][0].norm()).max(local.m[0][1].norm()).max(local.m[1][1].norm());
            }
            let scale = eta_x[k].norm().max(1.0);
            r = r.max((eta_y[k] - s * eta_x[k]).norm() / scale);
            r.max((eta_y[k] - eta_x[k] * s).norm() / scale)
        })
        .fold(0.0, f64::max)
}

pub fn apply_eta(hg: &HopfGrid, policy: &EtaPolicy, fg: &FrameGrid, sg: &SphereCongruenceGrid) -> Result<CircleGrid> {
    apply_eta_with(hg, policy, fg, sg, &CmcOptions::default())
}

pub fn apply_eta_with(
    hg: &HopfGrid,
    policy: &EtaPolicy,
    fg: &FrameGrid,
    sg: &SphereCongruenceGrid,
    opts: &CmcOptions,
) -> Result<CircleGrid> {
    let (n1, n2, lattice) = (fg.n1, fg.n2, fg.lattice);
    let mask = fg.mask.clone();
    let z = Quaternion::ZERO;
    // closed-form policies give B and C directly from chart blocks
    let blocks = |build: &(dyn Fn(&ChartForms) -> [[Quaternion; 4]; 4] + Sync)| {
        let per: Vec<[QMat2; 4]> = (0..fg.len())
            .into_par_iter()
            .map(|k| {
                if fg.mask[k] {
                    return [QMat2::ZERO; 4];
                }
                let c = chart_forms(fg, k);
                build(&c).map(|b| chart(fg.f[k], b[0], b[1], b[2], b[3]))
            })
            .collect();
        let col = |i: usize| per.iter().map(|p| p[i]).collect::<Vec<_>>();
        ((col(0), col(1)), (col(2), col(3)))
    };
    let (b, c) = match policy {
        EtaPolicy::Zero => ((hg.bx.clone(), hg.by.clone()), (hg.cx.clone(), hg.cy.clone())),
        EtaPolicy::CmcRho { rho, ambient: Ambient::S3 } => {
            validate_cmc_s3(fg, opts.tol)?;
            let (lo, hi) = (rho - 0.5, rho + 0.5);
            blocks(&|c: &ChartForms| {
                [
                    [z, z, c.dh.0.scale(lo), c.dr2.0],
                    [z, z, c.dh.1.scale(lo), c.dr2.1],
                    [c.dn2.0, z, c.dh.0.scale(hi), z],
                    [c.dn2.1, z, c.dh.1.scale(hi), z],
                ]
            })
        }
        EtaPolicy::CmcRho { rho, ambient: Ambient::R3 } => {
            validate_cmc_r3(fg, opts.tol)?;
            let rho = *rho;
            blocks(&|c: &ChartForms| {
                [
                    [z, z, c.dn2.0.scale(rho), c.dn2.0],
                    [z, z, c.dn2.1.scale(rho), c.dn2.1],
                    [c.dn2.0, z, c.dn2.0.scale(rho), z],
                    [c.dn2.1, z, c.dn2.1.scale(rho), z],
                ]
            })
        }
        EtaPolicy::HarmonicLeft => blocks(&|c: &ChartForms| {
            [
                [z, z, -c.dh.0, c.dr2.0],
                [z, z, -c.dh.1, c.dr2.1],
                [c.dn2.0, z, z, z],
                [c.dn2.1, z, z, z],
            ]
        }),
        EtaPolicy::HarmonicRight => blocks(&|c: &ChartForms| {
            [
                [z, z, z, c.dr2.0],
                [z, z, z, c.dr2.1],
                [c.dn2.0, z, c.dh.0, z],
                [c.dn2.1, z, c.dh.1, z],
            ]
        }),
        EtaPolicy::Custom { eta_x, eta_y } => {
            if eta_x.len() != fg.len() || eta_y.len() != fg.len() {
                return Err(Error::InvalidParams("eta grid does not match frame grid".into()));
            }
            let residual = eta_residual(eta_x, eta_y, fg, sg);
            if residual > opts.tol {
                return Err(Error::InvalidEta { residual });
            }
            let add = |a: &[QMat2], e: &[QMat2]| a.iter().zip(e).map(|(a, e)| *a + *e).collect::<Vec<_>>();
            ((add(&hg.bx, eta_x), add(&hg.by, eta_y)), (add(&hg.cx, eta_x), add(&hg.cy, eta_y)))
        }
    };
    let cg = CircleGrid::from_stars(n1, n2, lattice, b, c, mask);
    if matches!(policy, EtaPolicy::HarmonicLeft | EtaPolicy::HarmonicRight) {
        // the multiplier must satisfy the same constraints as a user-supplied one
        let ex: Vec<QMat2> = (0..fg.len()).map(|k| cg.bx[k] - hg.bx[k]).collect();
        let ey: Vec<QMat2> = (0..fg.len()).map(|k| cg.by[k] - hg.by[k]).collect();
        let scale = hg.bx.iter().chain(&hg.by).map(|m| m.norm()).fold(1.0, f64::max);
        let residual = eta_residual(&ex, &ey, fg, sg) / scale;
        if residual > 1e-6 {
            return Err(Error::InvalidEta { residual });
        }
    }
    Ok(cg)
}

/// `<X>` on endomorphisms of `H^2`: a quarter of the real trace of the underlying real 8x8 matrix.
pub fn pairing(x: &QMat2) -> f64 {
    x.re_trace()
}

/// `2 int <A ^ *A>` over the fundamental domain, trapezoidal rule.
fn energy_density(ax: &[QMat2], ay: &[QMat2], mask: &[bool], cell: f64) -> f64 {
    // (A ^ *A)(d/dx, d/dy) = -(A_x A_x + A_y A_y)
    let sum: f64 = (0..ax.len())
        .filter(|&k| !mask[k])
        .map(|k| -pairing(&(ax[k] * ax[k] + ay[k] * ay[k])))
        .sum();
    2.0 * sum * cell
}

/// Willmore energy from the Hopf field `A`.
pub fn willmore_energy(hg: &HopfGrid, deg_perp: i64) -> f64 {
    let cell = hg.lattice.area() / (hg.n1 * hg.n2) as f64;
    energy_density(&hg.ax, &hg.ay, &hg.mask, cell) - 2.0 * PI * deg_perp as f64
}

/// Willmore energy from the Hopf field `Q`.
pub fn willmore_energy_q(hg: &HopfGrid, deg_perp: i64) -> f64 {
    let cell = hg.lattice.area() / (hg.n1 * hg.n2) as f64;
    energy_density(&hg.qx, &hg.qy, &hg.mask, cell) + 2.0 * PI * deg_perp as f64
}

/// `deg(N) - deg(R)`.
pub fn normal_degree(fg: &FrameGrid) -> Result<i64> {
    let (dn, _) = degree(&fg.n, fg.n1, fg.n2, &fg.lattice)?;
    let (dr, _) = degree(&fg.r, fg.n1, fg.n2, &fg.lattice)?;
    Ok(dn - dr)
}

/// Largest cell circulation of a matrix-valued 1-form divided by the cell area.
pub fn closedness_residual(n1: usize, n2: usize, lattice: &TorusLattice, wx: &[QMat2], wy: &[QMat2]) -> f64 {
    let e1 = lattice.tau1 / n1 as f64;
    let e2 = lattice.tau2 / n2 as f64;
    let area = lattice.area() / (n1 * n2) as f64;
    let idx = |i: usize, j: usize| (i % n1) * n2 + (j % n2);
    let eval = |k: usize, e: crate::quat::C64| wx[k].scale(e.re) + wy[k].scale(e.im);
    let edge = |k0: usize, k1: usize, e: crate::quat::C64| (eval(k0, e) + eval(k1, e)).scale(0.5);
    (0..n1)
        .into_par_iter()
        .map(|i| {
            let mut worst: f64 = 0.0;
            for j in 0..n2 {
                let (p00, p10, p11, p01) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                let circ = edge(p00, p10, e1) + edge(p10, p11, e2) - edge(p11, p01, e1) - edge(p01, p00, e2);
                worst = worst.max(circ.norm() / area);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Discrete `d(2*A_circ)`; vanishes in the limit exactly for constrained Willmore data.
pub fn el_residual(cg: &CircleGrid) -> f64 {
    closedness_residual(cg.n1, cg.n2, &cg.lattice, &cg.bx, &cg.by)
}

/// Pointwise residuals of the structural identities of a [`CircleGrid`].
#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct CircleChecks {
    /// `*A_circ = S A_circ`
    pub star_a: f64,
    /// `*Q_circ = Q_circ S`
    pub star_q: f64,
    /// `A_circ (f,1) in (f,1) H` and `Q_circ (f,1) = 0`
    pub lines: f64,
    /// `dS = 2*Q_circ - 2*A_circ`
    pub ds: f64,
}

pub fn circle_checks(cg: &CircleGrid, fg: &FrameGrid, sg: &SphereCongruenceGrid) -> CircleChecks {
    let mut out = CircleChecks::default();
    let entry_fields: Vec<Vec<Quaternion>> =
        (0..4).map(|e| sg.s.iter().map(|s| s.m[e / 2][e % 2]).collect()).collect();
    let derivs: Vec<(Vec<Quaternion>, Vec<Quaternion>)> =
        entry_fields.iter().map(|f| quat_deriv(&fg.spectral, &fg.lattice, f)).collect();
    for k in (0..cg.len()).filter(|&k| !cg.mask[k]) {
        let s = sg.s[k];
        let scale = cg.ax[k].norm().max(cg.qx[k].norm()).max(1.0);
        out.star_a = out.star_a.max((cg.ay[k] - s * cg.ax[k]).norm() / scale);
        out.star_q = out.star_q.max((cg.qy[k] - cg.qx[k] * s).norm() / scale);
        let l = QVec2::new(fg.f[k], Quaternion::ONE);
        for a in [cg.ax[k], cg.ay[k]] {
            let v = a.apply(l);
            // v must be a right multiple of (f, 1)
            out.lines = out.lines.max((v.a - fg.f[k] * v.b).norm() / scale);
        }
        for q in [cg.qx[k], cg.qy[k]] {
            let v = q.apply(l);
            out.lines = out.lines.max(v.norm_sqr().sqrt() / scale);
        }
        let mut dsx = QMat2::ZERO;
        let mut dsy = QMat2::ZERO;
        for (e, (dx, dy)) in derivs.iter().enumerate() {
            dsx.m[e / 2][e % 2] = dx[k];
            dsy.m[e / 2][e % 2] = dy[k];
        }
        let rx = (dsx - (cg.cx[k] - cg.bx[k])).norm();
        let ry = (dsy - (cg.cy[k] - cg.by[k])).norm();
        out.ds = out.ds.max(rx.max(ry) / scale);
    }
    out
}

/// Largest `|S^2 + 1|` and violation of `S L = L`.
pub fn sphere_checks(sg: &SphereCongruenceGrid, fg: &FrameGrid) -> (f64, f64) {
    let mut sq: f64 = 0.0;
    let mut inv: f64 = 0.0;
    for k in (0..fg.len()).filter(|&k| !fg.mask[k]) {
        let s = sg.s[k];
        sq = sq.max((s * s + QMat2::identity()).norm());
        let v = s.apply(QVec2::new(fg.f[k], Quaternion::ONE));
        inv = inv.max((v.a - fg.f[k] * v.b).norm());
    }
    (sq, inv)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct AnalysisReport {
    pub willmore_energy: f64,
    pub willmore_energy_q: f64,
    pub deg_perp: i64,
    pub el_residual: f64,
    pub conf_residual: f64,
    pub masked_points: usize,
}

pub fn analyze(fg: &FrameGrid, policy: &EtaPolicy) -> Result<(AnalysisReport, CircleGrid)> {
    let sg = mean_curvature_sphere(fg);
    let hg = hopf_fields(fg, &sg);
    let cg = apply_eta(&hg, policy, fg, &sg)?;
    let deg_perp = normal_degree(fg)?;
    let report = AnalysisReport {
        willmore_energy: willmore_energy(&hg, deg_perp),
        willmore_energy_q: willmore_energy_q(&hg, deg_perp),
        deg_perp,
        el_residual: el_residual(&cg),
        conf_residual: fg.max_conformal_residual(),
        masked_points: fg.masked_points(),
    };
    Ok((report, cg))
}
