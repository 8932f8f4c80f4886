//! Parallel sections of the associated family on the sampling grid and the
//! Darboux transforms they span.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{LaurentForm, PathField};
use crate::moebius::{hopf_fields, mean_curvature_sphere, normal_degree, willmore_energy};
use crate::quat::{decomplexify, Quaternion, CVec4, C64};
use crate::surface::{quat_deriv, sample_frames_with, FrameGrid, FrameOptions, SampledSurfaceFile, SurfaceSpec, TorusLattice};

#[derive(Clone, Copy, Debug)]
pub struct SectionOptions {
    /// RK4 steps per grid edge.
    pub substeps: usize,
    /// Largest admitted relative cell-consistency defect.
    pub tol: f64,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions { substeps: 4, tol: 1e-5 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParallelSection {
    pub n1: usize,
    pub n2: usize,
    #[serde(skip)]
    pub lattice: TorusLattice,
    pub mu: C64,
    /// `psi` at grid point `(i, j)`, index `i * n2 + j`.
    #[serde(skip)]
    pub psi: Vec<CVec4>,
    /// `psi(i, n2)` reached by continuing each column once around.
    #[serde(skip)]
    pub end2: Vec<CVec4>,
    /// `psi(n1, j)` reached by continuing each row once around.
    #[serde(skip)]
    pub end1: Vec<CVec4>,
    /// Multipliers read off at the base point.
    pub multipliers: (C64, C64),
    /// Largest relative deviation of `psi(p + tau_k)` from `psi(p) h_k` along the grid boundary.
    pub monodromy_defect: f64,
    /// Largest relative mismatch over edges not in the spanning tree.
    pub consistency: f64,
}

impl ParallelSection {
    pub fn idx(&self, i: usize, j: usize) -> usize {
        (i % self.n1) * self.n2 + (j % self.n2)
    }
}

pub(crate) fn rk4_vec<const D: usize>(pf: &PathField<D>, mu: C64, start: usize, steps: usize, h: f64, v: nalgebra::SVector<C64, D>) -> nalgebra::SVector<C64, D> {
    let hc = C64::from(h);
    let mut v = v;
    for s in start..start + steps {
        let (a0, a1, a2) = (-pf.omega(2 * s, mu), -pf.omega(2 * s + 1, mu), -pf.omega(2 * s + 2, mu));
        let k1 = a0 * v;
        let k2 = a1 * (v + k1 * (hc * 0.5));
        let k3 = a1 * (v + k2 * (hc * 0.5));
        let k4 = a2 * (v + k3 * hc);
        v += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (hc / 6.0);
    }
    v
}

fn rel(a: &CVec4, b: &CVec4) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Transports `seed` from grid point (0, 0) along the first row and then up every column.
pub fn parallel_section(form: &LaurentForm<4>, mu: C64, seed: CVec4, opts: &SectionOptions) -> Result<ParallelSection> {
    if mu.norm() == 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParams("mu must be a finite nonzero complex number".into()));
    }
    if seed.norm() == 0.0 || opts.substeps == 0 {
        return Err(Error::InvalidParams("seed must be nonzero and substeps positive".into()));
    }
    let (n1, n2, sub) = (form.n1, form.n2, opts.substeps);
    let rows: Vec<PathField<4>> = (0..n2)
        .into_par_iter()
        .map(|j| form.path_field(0.0, j as f64 / n2 as f64, 1, 0, 2 * n1 * sub))
        .collect();
    let cols: Vec<PathField<4>> = (0..n1)
        .into_par_iter()
        .map(|i| form.path_field(i as f64 / n1 as f64, 0.0, 0, 1, 2 * n2 * sub))
        .collect();
    let (h1, h2) = (1.0 / (n1 * sub) as f64, 1.0 / (n2 * sub) as f64);

    let mut base_row = Vec::with_capacity(n1 + 1);
    base_row.push(seed);
    for i in 0..n1 {
        let next = rk4_vec(&rows[0], mu, i * sub, sub, h1, base_row[i]);
        base_row.push(next);
    }
    let columns: Vec<Vec<CVec4>> = (0..n1)
        .into_par_iter()
        .map(|i| {
            let mut c = Vec::with_capacity(n2 + 1);
            c.push(base_row[i]);
            for j in 0..n2 {
                let next = rk4_vec(&cols[i], mu, j * sub, sub, h2, c[j]);
                c.push(next);
            }
            c
        })
        .collect();
    let mut psi = vec![CVec4::zeros(); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            psi[i * n2 + j] = columns[i][j];
        }
    }
    let end2: Vec<CVec4> = (0..n1).map(|i| columns[i][n2]).collect();
    let end1: Vec<CVec4> = (0..n2)
        .into_par_iter()
        .map(|j| if j == 0 { base_row[n1] } else { rk4_vec(&rows[j], mu, (n1 - 1) * sub, sub, h1, psi[(n1 - 1) * n2 + j]) })
        .collect();

    let rayleigh = |a: &CVec4, b: &CVec4| (a.adjoint() * b)[(0, 0)] / a.norm_squared();
    let m1 = rayleigh(&seed, &base_row[n1]);
    let m2 = rayleigh(&seed, &end2[0]);
    let mono = (0..n2)
        .map(|j| rel(&(psi[j] * m1), &end1[j]))
        .chain((0..n1).map(|i| rel(&(psi[i * n2] * m2), &end2[i])))
        .fold(0.0, f64::max);

    // row edges off the tree
    let consistency = (1..n2)
        .into_par_iter()
        .map(|j| {
            (0..n1 - 1)
                .map(|i| rel(&rk4_vec(&rows[j], mu, i * sub, sub, h1, psi[i * n2 + j]), &psi[(i + 1) * n2 + j]))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    if consistency > opts.tol {
        return Err(Error::InsufficientResolution { drift: consistency });
    }
    Ok(ParallelSection {
        n1,
        n2,
        lattice: form.lattice,
        mu,
        psi,
        end2,
        end1,
        multipliers: (m1, m2),
        monodromy_defect: mono,
        consistency,
    })
}

/// `q1 - f q2` for `psi = (q1, q2)`: the image of `psi` in `V / L` with `L = (f, 1) H`.
pub fn project_transverse(psi: &CVec4, f: Quaternion) -> Quaternion {
    let v = decomplexify(psi);
    v.a - f * v.b
}

/// Largest relative transverse part of `d psi` (second-order differences) over the grid.
pub fn prolongation_residual(ps: &ParallelSection, fg: &FrameGrid) -> Result<f64> {
    if fg.n1 != ps.n1 || fg.n2 != ps.n2 {
        return Err(Error::InvalidParams("frame grid and section dimensions differ".into()));
    }
    let (n1, n2) = (ps.n1, ps.n2);
    let (cxs, cxt, cys, cyt) = fg.lattice.xy_from_st();
    let at = |i: isize, j: isize| -> CVec4 {
        match (i, j) {
            (i, j) if i == n1 as isize && (0..n2 as isize).contains(&j) => ps.end1[j as usize],
            (i, j) if j == n2 as isize && (0..n1 as isize).contains(&i) => ps.end2[i as usize],
            (i, j) => ps.psi[ps.idx(i as usize, j as usize)],
        }
    };
    let worst = (0..n1 * n2)
        .into_par_iter()
        .map(|k| {
            let (i, j) = ((k / n2) as isize, (k % n2) as isize);
            let ds = if i == 0 {
                (at(0, j) * C64::from(-3.0) + at(1, j) * C64::from(4.0) - at(2, j)) * C64::from(n1 as f64 / 2.0)
            } else {
                (at(i + 1, j) - at(i - 1, j)) * C64::from(n1 as f64 / 2.0)
            };
            let dt = if j == 0 {
                (at(i, 0) * C64::from(-3.0) + at(i, 1) * C64::from(4.0) - at(i, 2)) * C64::from(n2 as f64 / 2.0)
            } else {
                (at(i, j + 1) - at(i, j - 1)) * C64::from(n2 as f64 / 2.0)
            };
            let dx = ds * C64::from(cxs) + dt * C64::from(cxt);
            let dy = ds * C64::from(cys) + dt * C64::from(cyt);
            let f = fg.f[k];
            let scale = dx.norm().max(dy.norm());
            if scale <= 1e-12 * ps.psi[k].norm() {
                return 0.0;
            }
            project_transverse(&dx, f).norm().max(project_transverse(&dy, f).norm()) / scale
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

#[derive(Clone, Copy, Debug)]
pub struct DarbouxOptions {
    /// Mask where `|q2| < threshold |psi|`.
    pub infinity_threshold: f64,
    /// Mask where `|q1 - f q2| < threshold |psi|`.
    pub line_threshold: f64,
}

impl Default for DarbouxOptions {
    fn default() -> Self {
        DarbouxOptions { infinity_threshold: 1e-6, line_threshold: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxMap {
    pub n1: usize,
    pub n2: usize,
    #[serde(skip)]
    pub lattice: TorusLattice,
    pub f: Vec<Quaternion>,
    pub mask: Vec<bool>,
    /// Per-point normalized conformality residual (0 on masked points).
    pub conformality: Vec<f64>,
    /// Largest spread `|f(p) - f(0)|` over valid points.
    pub spread: f64,
}

impl DarbouxMap {
    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|m| **m).count() as f64 / self.mask.len() as f64
    }

    pub fn is_constant(&self, tol: f64) -> bool {
        self.spread <= tol * self.f.iter().zip(&self.mask).filter(|(_, m)| !**m).map(|(q, _)| q.norm()).fold(1.0, f64::max)
    }

    /// Same schema as surface ingestion.
    pub fn mesh(&self) -> SampledSurfaceFile {
        SampledSurfaceFile::new(self.lattice, self.n1, self.n2, &self.f)
    }
}

/// `f# = q1 q2^-1` for `psi = (q1, q2)` with the surface line `(f, 1) H`.
pub fn darboux_transform(ps: &ParallelSection, fg: &FrameGrid, opts: &DarbouxOptions) -> Result<DarbouxMap> {
    if fg.n1 != ps.n1 || fg.n2 != ps.n2 {
        return Err(Error::InvalidParams("frame grid and section dimensions differ".into()));
    }
    let total = ps.psi.len();
    let mut f = Vec::with_capacity(total);
    let mut mask = Vec::with_capacity(total);
    for (k, v) in ps.psi.iter().enumerate() {
        let q = decomplexify(v);
        let norm = v.norm();
        let bad = q.b.norm() < opts.infinity_threshold * norm
            || project_transverse(v, fg.f[k]).norm() < opts.line_threshold * norm
            || fg.mask[k];
        mask.push(bad);
        f.push(if bad { Quaternion::ZERO } else { q.a * q.b.inv() });
    }
    let masked = mask.iter().filter(|m| **m).count();
    if 2 * masked > total {
        return Err(Error::MaskedMajority { fraction: masked as f64 / total as f64 });
    }
    let conformality = conformality_field(&f, &mask, ps.n1, ps.n2, &fg.lattice, &fg.spectral);
    let first = (0..total).find(|&k| !mask[k]).map(|k| f[k]).unwrap_or(Quaternion::ZERO);
    let spread = (0..total).filter(|&k| !mask[k]).map(|k| (f[k] - first).norm()).fold(0.0, f64::max);
    Ok(DarbouxMap { n1: ps.n1, n2: ps.n2, lattice: fg.lattice, f, mask, conformality, spread })
}

/// Spectral derivatives when nothing is masked, otherwise central differences on valid stencils.
fn conformality_field(
    f: &[Quaternion],
    mask: &[bool],
    n1: usize,
    n2: usize,
    lattice: &TorusLattice,
    sp: &crate::fourier::Spectral,
) -> Vec<f64> {
    let total = f.len();
    let (fx, fy): (Vec<Quaternion>, Vec<Quaternion>) = if mask.iter().all(|m| !m) {
        quat_deriv(sp, lattice, f)
    } else {
        let (cxs, cxt, cys, cyt) = lattice.xy_from_st();
        (0..total)
            .map(|k| {
                let (i, j) = (k / n2, k % n2);
                let id = |a: usize, b: usize| (a % n1) * n2 + (b % n2);
                let nb = [id(i + 1, j), id(i + n1 - 1, j), id(i, j + 1), id(i, j + n2 - 1)];
                if nb.iter().any(|&q| mask[q]) {
                    return (Quaternion::ZERO, Quaternion::ZERO);
                }
                let ds = (f[nb[0]] - f[nb[1]]).scale(n1 as f64 / 2.0);
                let dt = (f[nb[2]] - f[nb[3]]).scale(n2 as f64 / 2.0);
                (ds.scale(cxs) + dt.scale(cxt), ds.scale(cys) + dt.scale(cyt))
            })
            .unzip()
    };
    (0..total)
        .map(|k| {
            if mask[k] {
                return 0.0;
            }
            let (a, b) = (fx[k].norm_sqr(), fy[k].norm_sqr());
            if a + b == 0.0 {
                return 0.0;
            }
            ((a - b).abs() + 2.0 * fx[k].dot(fy[k]).abs()) / (a + b)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TransformQuality {
    pub degenerate: bool,
    pub conformality: f64,
    pub willmore_energy: Option<f64>,
    pub masked_points: usize,
    pub masked_fraction: f64,
    /// Distance of `W / 4π` to the nearest integer, reported only.
    pub quantization_gap: Option<f64>,
}

pub fn transform_quality(dm: &DarbouxMap) -> TransformQuality {
    let masked = dm.mask.iter().filter(|m| **m).count();
    let degenerate = dm.is_constant(1e-8);
    let conformality = if degenerate {
        0.0
    } else {
        dm.conformality.iter().zip(&dm.mask).filter(|(_, m)| !**m).map(|(c, _)| *c).fold(0.0, f64::max)
    };
    let willmore = if degenerate || masked > 0 {
        None
    } else {
        SurfaceSpec::sampled(dm.lattice, dm.n1, dm.n2, dm.f.clone()).ok().and_then(|spec| {
            let opts = FrameOptions { immersion_threshold: 1e-6, conformal_tol: f64::INFINITY };
            let fg = sample_frames_with(&spec, dm.n1, dm.n2, &opts).ok()?;
            let sg = mean_curvature_sphere(&fg);
            let deg = normal_degree(&fg).ok()?;
            Some(willmore_energy(&hopf_fields(&fg, &sg), deg))
        })
    };
    let quantization_gap = willmore.map(|w| {
        let q = w / (4.0 * std::f64::consts::PI);
        (q - q.round()).abs()
    });
    TransformQuality {
        degenerate,
        conformality,
        willmore_energy: willmore,
        masked_points: masked,
        masked_fraction: masked as f64 / dm.mask.len() as f64,
        quantization_gap,
    }
}

/// Relative size of the `(1,0)` part `P_x psi` against `(P_x + M_x) psi`, maximised over the grid.
pub fn asymptotic_residual(form: &LaurentForm<4>, ps: &ParallelSection) -> f64 {
    (0..ps.psi.len())
        .map(|k| {
            let v = ps.psi[k];
            let p = form.px[k] * v;
            let a = (form.px[k] + form.mx[k]) * v;
            if a.norm() < 1e-14 * v.norm() {
                0.0
            } else {
                p.norm() / a.norm()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{connection_form, MuForm};
    use crate::moebius::{apply_eta, Ambient, EtaPolicy};
    use crate::spectral::{eigenline_multiplier, CurveShape, SpectralCurve, SpectralOptions};
    use crate::surface::{builtin_surface, sample_frames, BuiltinKind};

    fn setup(n: usize, rho: f64) -> (FrameGrid, MuForm) {
        let fg = sample_frames(&builtin_surface(&BuiltinKind::Clifford).unwrap(), n, n).unwrap();
        let sg = mean_curvature_sphere(&fg);
        let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::CmcRho { rho, ambient: Ambient::S3 }, &fg, &sg).unwrap();
        let mf = connection_form(&cg, &sg);
        (fg, mf)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mu_one_gives_constant_section() {
        let (fg, mf) = setup(16, 0.5);
        let seed = CVec4::new(c(0.3, 0.1), c(-0.2, 0.5), c(1.0, 0.0), c(0.1, 0.2));
        let ps = parallel_section(&mf, c(1.0, 0.0), seed, &SectionOptions::default()).unwrap();
        assert!(ps.psi.iter().all(|v| (v - seed).norm() == 0.0));
        assert_eq!(prolongation_residual(&ps, &fg).unwrap(), 0.0);
        let dm = darboux_transform(&ps, &fg, &DarbouxOptions::default()).unwrap();
        assert!(dm.is_constant(1e-12));
        assert!(transform_quality(&dm).degenerate);
    }

    #[test]
    fn eigen_seed_has_multiplier_monodromy() {
        let (fg, mf) = setup(32, 0.5);
        let mu = c(0.8, 0.9);
        let curve = SpectralCurve::new(&mf, CurveShape { sheets: 2, trivial: 2 }, (1, 0), &[mu], SpectralOptions::default()).unwrap();
        let m = eigenline_multiplier(&curve, mu, 0).unwrap();
        let ps = parallel_section(&mf, mu, m.vector, &SectionOptions::default()).unwrap();
        assert!(ps.monodromy_defect < 1e-7, "{}", ps.monodromy_defect);
        assert!((ps.multipliers.0 - m.h1).norm() < 1e-7 && (ps.multipliers.1 - m.h2).norm() < 1e-7);

        let generic = CVec4::new(c(0.3, 0.1), c(-0.2, 0.5), c(1.0, 0.0), c(0.1, 0.2));
        let pg = parallel_section(&mf, mu, generic, &SectionOptions::default()).unwrap();
        assert!(pg.monodromy_defect > 1e-3);
        let _ = fg;
    }

    #[test]
    fn prolongation_residual_decays() {
        let mu = c(2.0, 0.0);
        let seed = CVec4::new(c(0.3, 0.1), c(-0.2, 0.5), c(1.0, 0.0), c(0.1, 0.2));
        let res: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let (fg, mf) = setup(n, 0.3);
                let ps = parallel_section(&mf, mu, seed, &SectionOptions::default()).unwrap();
                prolongation_residual(&ps, &fg).unwrap()
            })
            .collect();
        for w in res.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope > 1.7, "{res:?}");
        }
    }

    #[test]
    fn random_section_is_not_prolonged() {
        let (fg, mf) = setup(32, 0.3);
        let mut ps = parallel_section(&mf, c(1.0, 0.0), CVec4::new(c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)), &SectionOptions::default()).unwrap();
        for (k, v) in ps.psi.iter_mut().enumerate() {
            let (i, j) = ((k / 32) as f64, (k % 32) as f64);
            let a = 2.0 * std::f64::consts::PI / 32.0;
            *v = CVec4::new(c((a * i).cos(), 0.0), c((a * j).sin(), 0.3), c(1.0, (a * (i + j)).sin()), c(0.2, 0.0));
        }
        ps.end1 = (0..32).map(|j| ps.psi[j]).collect();
        ps.end2 = (0..32).map(|i| ps.psi[i * 32]).collect();
        assert!(prolongation_residual(&ps, &fg).unwrap() > 1e-2);
    }

    #[test]
    fn darboux_mesh_round_trips() {
        let (fg, mf) = setup(32, 0.5);
        let mu = c(0.8, 0.9);
        let curve = SpectralCurve::new(&mf, CurveShape { sheets: 2, trivial: 2 }, (1, 0), &[mu], SpectralOptions::default()).unwrap();
        let m = eigenline_multiplier(&curve, mu, 0).unwrap();
        let ps = parallel_section(&mf, mu, m.vector, &SectionOptions::default()).unwrap();
        let dm = darboux_transform(&ps, &fg, &DarbouxOptions::default()).unwrap();
        let q = transform_quality(&dm);
        assert!(!q.degenerate);
        assert!(q.conformality < 1e-3, "{q:?}");
        let json = serde_json::to_string(&dm.mesh()).unwrap();
        let spec = SurfaceSpec::from_json(&json).unwrap();
        let opts = FrameOptions { immersion_threshold: 1e-6, conformal_tol: 1.0 };
        let back = sample_frames_with(&spec, 32, 32, &opts).unwrap();
        assert!(back.f.iter().zip(&dm.f).all(|(a, b)| (*a - *b).norm() < 1e-9));
    }

    #[test]
    fn masked_majority_is_an_error() {
        let (fg, mf) = setup(16, 0.5);
        // a constant section inside the line at infinity masks everything
        let ps = parallel_section(&mf, c(1.0, 0.0), CVec4::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)), &SectionOptions::default()).unwrap();
        assert!(matches!(darboux_transform(&ps, &fg, &DarbouxOptions::default()), Err(Error::MaskedMajority { .. })));
    }
}
