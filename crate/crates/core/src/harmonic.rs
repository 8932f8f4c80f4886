//! Harmonic maps `N: T^2 -> S^2`, the rank-one Willmore connection they induce,
//! its 2x2 associated family and the embedding into the 4x4 family.
//! CMC multipliers and the 2-step Backlund lines live here as well.

use nalgebra::{DMatrix, SVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::darboux::rk4_vec;
use crate::error::{Error, Result};
use crate::family::{connection_form, LaurentForm, MuForm, PathField};
use crate::holonomy::{det, eigenvalues, holonomy_pair, multiset_distance, TransportOptions};
use crate::moebius::{
    antiholo_part, apply_eta, apply_eta_with, hopf_fields, mean_curvature_sphere, validate_cmc_s3, Ambient, CircleGrid,
    CmcOptions, EtaPolicy, SphereCongruenceGrid,
};
use crate::quat::{decomplexify, embed_qmat, CMat2, CVec2, CVec4, QMat2, QVec2, Quaternion, C64, I};
use crate::spectral::{spectral_report, BranchOptions, CurveShape, SpectralCurve, SpectralOptions, SpectralReport, SweepSpec};
use crate::surface::{quat_deriv, sample_frames, FrameGrid, SurfaceSpec, TorusLattice};
use crate::fourier::Spectral;

/// A unit imaginary quaternion field with its partials.
#[derive(Clone, Debug)]
pub struct HarmonicMapGrid {
    pub n1: usize,
    pub n2: usize,
    pub lattice: TorusLattice,
    pub n: Vec<Quaternion>,
    pub nx: Vec<Quaternion>,
    pub ny: Vec<Quaternion>,
    /// Largest plaquette value of `d(dN')`, relative to `max |dN|^2`.
    pub residual: f64,
}

impl HarmonicMapGrid {
    /// Partials by trigonometric differentiation.
    pub fn new(lattice: TorusLattice, n1: usize, n2: usize, n: Vec<Quaternion>) -> Result<Self> {
        if n.len() != n1 * n2 || n1 < 4 || n2 < 4 {
            return Err(Error::InvalidParams(format!("expected an n1 x n2 grid with n1, n2 >= 4, got {} samples", n.len())));
        }
        let worst = n.iter().map(|q| (q.norm() - 1.0).abs().max(q.re().abs())).fold(0.0, f64::max);
        if worst > 1e-8 {
            return Err(Error::InvalidParams(format!("field is not a unit imaginary quaternion (defect {worst:.3e})")));
        }
        let (nx, ny) = quat_deriv(&Spectral::new(n1, n2), &lattice, &n);
        Ok(Self::with_partials(lattice, n1, n2, n, nx, ny))
    }

    /// The left normal of a sampled immersion.
    pub fn from_frames(fg: &FrameGrid) -> Self {
        Self::with_partials(fg.lattice, fg.n1, fg.n2, fg.n.clone(), fg.nx.clone(), fg.ny.clone())
    }

    fn with_partials(
        lattice: TorusLattice,
        n1: usize,
        n2: usize,
        n: Vec<Quaternion>,
        nx: Vec<Quaternion>,
        ny: Vec<Quaternion>,
    ) -> Self {
        let mut hm = HarmonicMapGrid { n1, n2, lattice, n, nx, ny, residual: 0.0 };
        hm.residual = harmonicity_residual(&hm);
        hm
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `dN' = (dN - N *dN) / 2` as `(x, y)` components.
    pub fn dn_prime(&self, k: usize) -> (Quaternion, Quaternion) {
        antiholo_part(self.n[k], self.nx[k], self.ny[k])
    }

    /// `dN'' = (dN + N *dN) / 2`.
    pub fn dn_second(&self, k: usize) -> (Quaternion, Quaternion) {
        let (p, q) = self.dn_prime(k);
        (self.nx[k] - p, self.ny[k] - q)
    }

    /// Largest `|dN|` over the grid.
    pub fn gradient_scale(&self) -> f64 {
        self.nx.iter().zip(&self.ny).map(|(a, b)| a.norm().max(b.norm())).fold(0.0, f64::max)
    }

    /// Largest norms of `A = N dN' / 2` and `Q = N dN'' / 2`.
    pub fn hopf_norms(&self) -> (f64, f64) {
        (0..self.len()).fold((0.0, 0.0), |(a, q), k| {
            let (p1, p2) = self.dn_prime(k);
            let (s1, s2) = self.dn_second(k);
            (a.max(0.5 * p1.norm().max(p2.norm())), q.max(0.5 * s1.norm().max(s2.norm())))
        })
    }
}

/// Largest circulation of `dN'` around a grid cell divided by the cell area, relative to `max |dN|^2`.
pub fn harmonicity_residual(hm: &HarmonicMapGrid) -> f64 {
    let (n1, n2) = (hm.n1, hm.n2);
    let scale = hm.gradient_scale();
    if scale == 0.0 {
        return 0.0;
    }
    let (t1, t2) = (hm.lattice.tau1, hm.lattice.tau2);
    let along = |k: usize| {
        let (px, py) = hm.dn_prime(k);
        (px.scale(t1.re) + py.scale(t1.im), px.scale(t2.re) + py.scale(t2.im))
    };
    let forms: Vec<(Quaternion, Quaternion)> = (0..hm.len()).into_par_iter().map(along).collect();
    let idx = |i: usize, j: usize| (i % n1) * n2 + (j % n2);
    let area = hm.lattice.area() / (n1 * n2) as f64;
    let (h1, h2) = (0.5 / n1 as f64, 0.5 / n2 as f64);
    let worst = (0..n1 * n2)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            let (a, b, c, d) = (forms[idx(i, j)], forms[idx(i + 1, j)], forms[idx(i + 1, j + 1)], forms[idx(i, j + 1)]);
            let circ = (a.0 + b.0).scale(h1) + (b.1 + c.1).scale(h2) - (d.0 + c.0).scale(h1) - (a.1 + d.1).scale(h2);
            circ.norm() / area
        })
        .reduce(|| 0.0, f64::max);
    worst / (scale * scale)
}

/// The 2x2 associated family `Omega_2(mu) = (mu - 1) P_2 + (1/mu - 1) M_2` of a harmonic map.
#[derive(Clone, Debug)]
pub struct Rank1Family {
    pub form: LaurentForm<2>,
    pub harmonicity: f64,
    /// Largest norms of `A` and `Q`.
    pub a_max: f64,
    pub q_max: f64,
}

impl Rank1Family {
    /// One of `A`, `Q` vanishes identically.
    pub fn is_conformal(&self) -> bool {
        let scale = self.a_max.max(self.q_max);
        scale == 0.0 || self.a_max.min(self.q_max) < 1e-8 * scale
    }
}

fn rank1_parts(n: Quaternion, a: Quaternion) -> (CMat2, CMat2) {
    let id = CMat2::identity();
    let ln = n.left_matrix() * I;
    let la = a.left_matrix();
    ((id - ln) * la * C64::from(0.5), (id + ln) * la * C64::from(0.5))
}

/// `P_2 = (1 - i N)/2 A`, `M_2 = (1 + i N)/2 A` with `A = N dN' / 2`, all acting by left multiplication.
pub fn rank1_family(hm: &HarmonicMapGrid, tol: f64) -> Result<Rank1Family> {
    if hm.residual > tol {
        return Err(Error::NotHarmonic { residual: hm.residual });
    }
    let parts: Vec<[CMat2; 4]> = (0..hm.len())
        .into_par_iter()
        .map(|k| {
            let n = hm.n[k];
            let (dx, dy) = hm.dn_prime(k);
            let (px, mx) = rank1_parts(n, (n * dx).scale(0.5));
            let (py, my) = rank1_parts(n, (n * dy).scale(0.5));
            [px, py, mx, my]
        })
        .collect();
    let col = |i: usize| parts.iter().map(|p| p[i]).collect::<Vec<_>>();
    let form = LaurentForm::new(hm.n1, hm.n2, hm.lattice, col(0), col(1), col(2), col(3));
    let (a_max, q_max) = hm.hopf_norms();
    Ok(Rank1Family { form, harmonicity: hm.residual, a_max, q_max })
}

#[derive(Clone, Debug, Serialize)]
pub struct Rank1Holonomy {
    pub mu: C64,
    #[serde(skip)]
    pub h1: CMat2,
    #[serde(skip)]
    pub h2: CMat2,
    pub eigenvalues: Vec<C64>,
    /// `max |det H_k - 1|`.
    pub det_drift: f64,
    pub commutator: f64,
    pub error_estimate: f64,
}

pub fn rank1_holonomy(rf: &Rank1Family, mu: C64, base: (f64, f64), opts: &TransportOptions) -> Result<Rank1Holonomy> {
    let (t1, t2) = holonomy_pair(&rf.form, mu, base, opts)?;
    let (h1, h2) = (t1.h, t2.h);
    let one = C64::new(1.0, 0.0);
    Ok(Rank1Holonomy {
        mu,
        h1,
        h2,
        eigenvalues: eigenvalues(&h1),
        det_drift: (det(&h1) - one).norm().max((det(&h2) - one).norm()),
        commutator: (h1 * h2 - h2 * h1).norm(),
        error_estimate: t1.error_estimate.max(t2.error_estimate),
    })
}

/// The hyperelliptic curve of the 2x2 family over an annulus.
pub fn harmonic_spectral(
    rf: &Rank1Family,
    generator: (i64, i64),
    sweep: &SweepSpec,
    branch: &BranchOptions,
    opts: SpectralOptions,
) -> Result<SpectralReport> {
    if rf.is_conformal() {
        return Err(Error::ConformalHarmonic);
    }
    sweep.validate()?;
    let curve = SpectralCurve::new(&rf.form, CurveShape { sheets: 2, trivial: 0 }, generator, &sweep.probes(), opts)?;
    spectral_report(&curve, sweep, branch)
}

/// 2x2 eigenvalues next to the nontrivial eigenvalues of a Case II 4x4 family.
#[derive(Clone, Debug, Serialize)]
pub struct PairedEigenvalues {
    pub mu: C64,
    pub rank1: Vec<C64>,
    pub stripped: Vec<C64>,
    pub distance: f64,
}

pub fn compare_families(
    rf: &Rank1Family,
    form: &MuForm,
    mus: &[C64],
    generator: (i64, i64),
    opts: SpectralOptions,
) -> Result<Vec<PairedEigenvalues>> {
    let two = SpectralCurve::new(&rf.form, CurveShape { sheets: 2, trivial: 0 }, generator, mus, opts)?;
    let four = SpectralCurve::new(form, CurveShape { sheets: 2, trivial: 2 }, generator, mus, opts)?;
    Ok(mus
        .par_iter()
        .map(|&mu| {
            let rank1 = two.sheets_at(mu);
            let stripped = four.sheets_at(mu);
            let distance = multiset_distance(&rank1, &stripped).max(multiset_distance(&stripped, &rank1));
            PairedEigenvalues { mu, rank1, stripped, distance }
        })
        .collect())
}

/// A parallel section of a `D x D` family on the grid, reached along row 0 and then up each column.
fn grid_section<const D: usize>(
    form: &LaurentForm<D>,
    mu: C64,
    seed: SVector<C64, D>,
    substeps: usize,
) -> Vec<SVector<C64, D>> {
    let (n1, n2, sub) = (form.n1, form.n2, substeps);
    let row: PathField<D> = form.path_field(0.0, 0.0, 1, 0, 2 * n1 * sub);
    let h1 = 1.0 / (n1 * sub) as f64;
    let h2 = 1.0 / (n2 * sub) as f64;
    let mut base = vec![seed];
    for i in 0..n1 - 1 {
        base.push(rk4_vec(&row, mu, i * sub, sub, h1, base[i]));
    }
    let cols: Vec<Vec<SVector<C64, D>>> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let pf = form.path_field(i as f64 / n1 as f64, 0.0, 0, 1, 2 * n2 * sub);
            let mut c = vec![base[i]];
            for j in 0..n2 - 1 {
                let next = rk4_vec(&pf, mu, j * sub, sub, h2, c[j]);
                c.push(next);
            }
            c
        })
        .collect();
    cols.into_iter().flatten().collect()
}

/// A parallel section `g` of the 2x2 family, one value per grid point.
#[derive(Clone, Debug)]
pub struct Rank1Section {
    pub n1: usize,
    pub n2: usize,
    pub mu: C64,
    pub g: Vec<CVec2>,
}

pub fn rank1_section(rf: &Rank1Family, mu: C64, seed: CVec2, substeps: usize) -> Result<Rank1Section> {
    if mu.norm() == 0.0 || !mu.is_finite() || seed.norm() == 0.0 || substeps == 0 {
        return Err(Error::InvalidParams("need finite nonzero mu, nonzero seed and positive substeps".into()));
    }
    let g = grid_section(&rf.form, mu, seed, substeps);
    Ok(Rank1Section { n1: rf.form.n1, n2: rf.form.n2, mu, g })
}

/// Line fields of the 2-step Backlund transforms.
#[derive(Clone, Debug)]
pub struct BacklundLines {
    /// `ker A_circ` per point as a unit representative; `None` where `A_circ` vanishes.
    pub ker: Vec<Option<QVec2>>,
    /// `im Q_circ` per point.
    pub im: Vec<Option<QVec2>>,
    /// Largest line distance from the first defined line.
    pub ker_residual: f64,
    pub im_residual: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct BacklundOptions {
    /// Relative singular value above which the complexified rank counts as 3.
    pub rank_tol: f64,
    /// Absolute norm below which the form counts as zero.
    pub zero_tol: f64,
}

impl Default for BacklundOptions {
    fn default() -> Self {
        BacklundOptions { rank_tol: 1e-6, zero_tol: 1e-12 }
    }
}

fn unit_line(v: &CVec4) -> QVec2 {
    let n = v.norm();
    decomplexify(&(v / C64::from(n)))
}

/// Sine of the angle between two quaternionic lines: the part of `y` orthogonal to `x H`.
pub fn line_distance(x: &QVec2, y: &QVec2) -> f64 {
    let (nx, ny) = (x.norm_sqr().sqrt(), y.norm_sqr().sqrt());
    let (x, y) = (x.mul_right(Quaternion::real(1.0 / nx)), y.mul_right(Quaternion::real(1.0 / ny)));
    let ip = x.a.conj() * y.a + x.b.conj() * y.b;
    let p = x.mul_right(ip);
    ((y.a - p.a).norm_sqr() + (y.b - p.b).norm_sqr()).sqrt()
}

fn stacked(xs: &QMat2, ys: &QMat2, rows: bool) -> DMatrix<C64> {
    let (a, b) = (embed_qmat(xs), embed_qmat(ys));
    if rows {
        DMatrix::from_fn(8, 4, |r, c| if r < 4 { a[(r, c)] } else { b[(r - 4, c)] })
    } else {
        DMatrix::from_fn(4, 8, |r, c| if c < 4 { a[(r, c)] } else { b[(r, c - 4)] })
    }
}

fn constancy(lines: &[Option<QVec2>]) -> f64 {
    let mut defined = lines.iter().flatten();
    match defined.next() {
        Some(first) => defined.map(|l| line_distance(first, l)).fold(0.0, f64::max),
        None => 0.0,
    }
}

/// Pointwise `ker(2*A_circ)` and `im(2*Q_circ)`.
pub fn backlund_points(cg: &CircleGrid, opts: &BacklundOptions) -> Result<BacklundLines> {
    let per: Vec<(Option<QVec2>, Option<QVec2>, bool)> = (0..cg.len())
        .into_par_iter()
        .map(|k| {
            if cg.mask[k] {
                return (None, None, false);
            }
            let kb = stacked(&cg.bx[k], &cg.by[k], true).svd(false, true);
            let ic = stacked(&cg.cx[k], &cg.cy[k], false).svd(true, false);
            let mut bad = false;
            let ker = {
                let s = &kb.singular_values;
                if s[0] <= opts.zero_tol {
                    None
                } else {
                    bad |= s[2] > opts.rank_tol * s[0];
                    let vt = kb.v_t.as_ref().expect("v_t requested");
                    Some(unit_line(&CVec4::from_fn(|r, _| vt[(3, r)].conj())))
                }
            };
            let im = {
                let s = &ic.singular_values;
                if s[0] <= opts.zero_tol {
                    None
                } else {
                    bad |= s[2] > opts.rank_tol * s[0];
                    let u = ic.u.as_ref().expect("u requested");
                    Some(unit_line(&CVec4::from_fn(|r, _| u[(r, 0)])))
                }
            };
            (ker, im, bad)
        })
        .collect();
    let count = per.iter().filter(|p| p.2).count();
    if count > 0 {
        return Err(Error::RankTwo { count });
    }
    let ker: Vec<_> = per.iter().map(|p| p.0).collect();
    let im: Vec<_> = per.iter().map(|p| p.1).collect();
    Ok(BacklundLines { ker_residual: constancy(&ker), im_residual: constancy(&im), ker, im })
}

/// The closed-form CMC multiplier family in the stated ambient space.
pub fn cmc_eta_family(fg: &FrameGrid, ambient: Ambient, rho: f64, opts: &CmcOptions) -> Result<CircleGrid> {
    let sg = mean_curvature_sphere(fg);
    let hg = hopf_fields(fg, &sg);
    apply_eta_with(&hg, &EtaPolicy::CmcRho { rho, ambient }, fg, &sg, opts)
}

/// `eta_0 = H S omega / 2` with `omega = Ad(T) [[0, 0], [dH, 0]]` for a CMC torus in the unit 3-sphere.
pub fn cmc_eta0_s3(fg: &FrameGrid, sg: &SphereCongruenceGrid, tol: f64) -> Result<(Vec<QMat2>, Vec<QMat2>)> {
    let hs3 = validate_cmc_s3(fg, tol)?;
    let z = Quaternion::ZERO;
    let eta = |k: usize, dh: Quaternion| {
        if fg.mask[k] {
            return QMat2::ZERO;
        }
        (sg.s[k] * QMat2::new(z, z, dh, z).ad_chart(fg.f[k])).scale(0.5 * hs3)
    };
    Ok(((0..fg.len()).map(|k| eta(k, fg.hx[k])).collect(), (0..fg.len()).map(|k| eta(k, fg.hy[k])).collect()))
}

/// Largest `|dH + dR'' f^{-1}|` relative to `max |dH|`.
pub fn cmc_dual_residual(fg: &FrameGrid) -> f64 {
    let mut scale: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for k in (0..fg.len()).filter(|k| !fg.mask[*k]) {
        let (d1, d2) = crate::moebius::holo_part(fg.r[k], fg.rx[k], fg.ry[k]);
        let fi = fg.f[k].inv();
        worst = worst.max((fg.hx[k] + d1 * fi).norm()).max((fg.hy[k] + d2 * fi).norm());
        scale = scale.max(fg.hx[k].norm()).max(fg.hy[k].norm());
    }
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}

/// A surface together with its family in the chart where `im Q_circ = infinity`.
#[derive(Clone, Debug)]
pub struct HarmonicChart {
    pub spec: SurfaceSpec,
    /// The finite point moved to infinity, if the chart was changed.
    pub moved: Option<Quaternion>,
    pub fg: FrameGrid,
    pub cg: CircleGrid,
    pub form: MuForm,
    /// Line distance of `im Q_circ` from infinity.
    pub chart_residual: f64,
}

/// Brings a surface with constant `im Q_circ` (for the given multiplier policy) into the chart where it is infinity.
pub fn harmonic_chart(spec: &SurfaceSpec, n1: usize, n2: usize, policy: &EtaPolicy, tol: f64) -> Result<HarmonicChart> {
    let infinity = QVec2::new(Quaternion::ONE, Quaternion::ZERO);
    let fg = sample_frames(spec, n1, n2)?;
    let sg = mean_curvature_sphere(&fg);
    let cg = apply_eta(&hopf_fields(&fg, &sg), policy, &fg, &sg)?;
    let lines = backlund_points(&cg, &BacklundOptions::default())?;
    if lines.im_residual > tol {
        return Err(Error::Precondition(format!("im Q_circ is not constant (residual {:.3e})", lines.im_residual)));
    }
    let line = lines.im.iter().flatten().next().copied().ok_or_else(|| Error::Precondition("Q_circ vanishes".into()))?;
    let (spec, moved, fg, cg) = if line_distance(&line, &infinity) <= tol {
        (spec.clone(), None, fg, cg)
    } else {
        let z0 = line.a * line.b.inv();
        let moved = spec.translated(z0).inverted();
        let fg = sample_frames(&moved, n1, n2)?;
        let sg = mean_curvature_sphere(&fg);
        let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::HarmonicLeft, &fg, &sg)?;
        (moved, Some(z0), fg, cg)
    };
    let lines = backlund_points(&cg, &BacklundOptions::default())?;
    let chart_residual = lines.im.iter().flatten().map(|l| line_distance(l, &infinity)).fold(0.0, f64::max);
    if chart_residual > tol {
        return Err(Error::Precondition(format!("im Q_circ is not infinity in the new chart ({chart_residual:.3e})")));
    }
    let sg = mean_curvature_sphere(&fg);
    let form = connection_form(&cg, &sg);
    Ok(HarmonicChart { spec, moved, fg, cg, form, chart_residual })
}

/// Projector order in the formula for `chi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChiOrder {
    Standard,
    /// Exchanged projectors; never parallel, kept as a regression guard.
    Swapped,
}

#[derive(Clone, Debug)]
pub struct Prolongation {
    pub mu: C64,
    pub psi: Vec<CVec4>,
    /// Largest `|d psi + Omega(mu) psi| / |psi|` by central differences at interior points.
    pub residual: f64,
}

/// `psi = (1, 0) g + (f, 1) chi` with `chi = pi_R^(0,1)(R H g)(mu - 1)/2 + pi_R^(1,0)(R H g)(1/mu - 1)/2`.
pub fn prolong_embed(section: &Rank1Section, chart: &HarmonicChart, order: ChiOrder) -> Result<Prolongation> {
    let fg = &chart.fg;
    if section.n1 != fg.n1 || section.n2 != fg.n2 {
        return Err(Error::InvalidParams("section and chart grids differ".into()));
    }
    if fg.masked_points() > 0 {
        return Err(Error::Precondition("prolongation needs an immersed grid".into()));
    }
    let mu = section.mu;
    let (cp, cm) = ((mu - 1.0) * 0.5, (mu.inv() - 1.0) * 0.5);
    let (cp, cm) = match order {
        ChiOrder::Standard => (cp, cm),
        ChiOrder::Swapped => (cm, cp),
    };
    let id = CMat2::identity();
    let psi: Vec<CVec4> = (0..fg.len())
        .into_par_iter()
        .map(|k| {
            let lr = fg.r[k].left_matrix() * I;
            let rhg = (fg.r[k] * fg.h[k]).left_matrix() * section.g[k];
            let chi = (id + lr) * rhg * (cp * 0.5) + (id - lr) * rhg * (cm * 0.5);
            let top = section.g[k] + fg.f[k].left_matrix() * chi;
            CVec4::new(top[0], top[1], chi[0], chi[1])
        })
        .collect();
    let (n1, n2) = (fg.n1, fg.n2);
    let (t1, t2) = (fg.lattice.tau1, fg.lattice.tau2);
    let residual = (1..n1 - 1)
        .into_par_iter()
        .map(|i| {
            (1..n2 - 1)
                .map(|j| {
                    let k = i * n2 + j;
                    let ds = (psi[k + n2] - psi[k - n2]) * C64::from(n1 as f64 / 2.0);
                    let dt = (psi[k + 1] - psi[k - 1]) * C64::from(n2 as f64 / 2.0);
                    let rs = ds + chart.form.omega(k, t1.re, t1.im, mu) * psi[k];
                    let rt = dt + chart.form.omega(k, t2.re, t2.im, mu) * psi[k];
                    rs.norm().max(rt.norm()) / psi[k].norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(Prolongation { mu, psi, residual })
}
