//! Parallel transport along lattice generators, eigen/Jordan analysis of
//! holonomies and the Case I / II / III classifier.
//!
//! The holonomy around `gamma` is the transport matrix `T(1)` of
//! `T' = -Omega(gamma'(t); mu) T`, `T(0) = Id`, so a parallel section
//! satisfies `psi(p + gamma) = T psi(p)`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{CMatN, LaurentForm, PathField};
use crate::quat::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportOptions {
    /// RK4 steps per path.
    pub steps: usize,
    /// Largest admitted step-doubling error estimate.
    pub tol: f64,
    /// Upper bound for adaptive refinement.
    pub max_steps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions { steps: 1024, tol: 1e-9, max_steps: 16384 }
    }
}

/// Straight path `t -> (s0 + a t, t0 + b t)` in lattice coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Path {
    pub s0: f64,
    pub t0: f64,
    pub a: i64,
    pub b: i64,
}

impl Path {
    pub fn generator(base: (f64, f64), a: i64, b: i64) -> Self {
        Path { s0: base.0, t0: base.1, a, b }
    }

    pub fn reversed(&self) -> Self {
        Path { s0: self.s0 + self.a as f64, t0: self.t0 + self.b as f64, a: -self.a, b: -self.b }
    }
}

#[derive(Clone, Debug)]
pub struct TransportResult<const D: usize> {
    pub h: CMatN<D>,
    pub mu: C64,
    pub generator: (i64, i64),
    pub steps: usize,
    pub error_estimate: f64,
}

/// RK4 over samples at `t = k / (2 steps)` using every `stride`-th step.
fn rk4<const D: usize>(pf: &PathField<D>, mu: C64, steps: usize, stride: usize) -> CMatN<D> {
    let (cp, cm) = (mu - 1.0, mu.inv() - 1.0);
    let om = |k: usize| -(pf.p[k] * cp + pf.m[k] * cm);
    let n = steps / stride;
    let h = C64::from(1.0 / n as f64);
    let half = C64::from(0.5);
    let mut t = CMatN::<D>::identity();
    for s in 0..n {
        let k0 = 2 * s * stride;
        let (a0, a1, a2) = (om(k0), om(k0 + stride), om(k0 + 2 * stride));
        let k1 = a0 * t;
        let k2 = a1 * (t + k1 * (h * half));
        let k3 = a1 * (t + k2 * (h * half));
        let k4 = a2 * (t + k3 * h);
        t += (k1 + k2 * C64::from(2.0) + k3 * C64::from(2.0) + k4) * (h / 6.0);
    }
    t
}

/// Precomputed connection samples along a fixed set of paths, reused for every `mu`.
pub struct HolonomyEngine<const D: usize> {
    pub paths: Vec<Path>,
    pub steps: usize,
    fields: Vec<PathField<D>>,
}

impl<const D: usize> HolonomyEngine<D> {
    pub fn new(form: &LaurentForm<D>, paths: &[Path], steps: usize) -> Result<Self> {
        if steps < 4 || !steps.is_multiple_of(2) {
            return Err(Error::InvalidParams(format!("RK4 step count must be even and >= 4, got {steps}")));
        }
        let fields = paths
            .par_iter()
            .map(|p| {
                let need = form.spectral.min_line_samples(p.a, p.b);
                if 2 * steps < need {
                    return Err(Error::InvalidParams(format!(
                        "{steps} steps under-resolve path ({}, {}); need >= {}",
                        p.a,
                        p.b,
                        need.div_ceil(2)
                    )));
                }
                Ok(form.path_field(p.s0, p.t0, p.a, p.b, 2 * steps))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HolonomyEngine { paths: paths.to_vec(), steps, fields })
    }

    /// Standard engine over `gamma1`, `gamma2`, `gamma1 + gamma2`, `gamma1 - gamma2` at `base`.
    pub fn generators(form: &LaurentForm<D>, base: (f64, f64), steps: usize) -> Result<Self> {
        let paths = [(1, 0), (0, 1), (1, 1), (1, -1)].map(|(a, b)| Path::generator(base, a, b));
        Self::new(form, &paths, steps)
    }

    /// Doubles the step count until every path meets `opts.tol` at each probe value.
    pub fn calibrated(form: &LaurentForm<D>, paths: &[Path], probes: &[C64], opts: &TransportOptions) -> Result<Self> {
        let need = paths.iter().map(|p| form.spectral.min_line_samples(p.a, p.b).div_ceil(2)).max().unwrap_or(2);
        let mut steps = opts.steps.max(need).next_multiple_of(2);
        loop {
            let eng = Self::new(form, paths, steps)?;
            let worst = probes
                .par_iter()
                .map(|&mu| (0..paths.len()).map(|i| eng.transport(i, mu).error_estimate).fold(0.0, f64::max))
                .reduce(|| 0.0, f64::max);
            if worst <= opts.tol {
                return Ok(eng);
            }
            if 2 * steps > opts.max_steps {
                return Err(Error::TransportAccuracy { estimate: worst, tol: opts.tol });
            }
            steps *= 2;
        }
    }

    pub fn transport(&self, index: usize, mu: C64) -> TransportResult<D> {
        let pf = &self.fields[index];
        let fine = rk4(pf, mu, self.steps, 1);
        let coarse = rk4(pf, mu, self.steps, 2);
        let p = self.paths[index];
        TransportResult {
            h: fine,
            mu,
            generator: (p.a, p.b),
            steps: self.steps,
            error_estimate: (fine - coarse).norm() / 15.0,
        }
    }

    pub fn transport_with_steps(&self, index: usize, mu: C64, stride: usize) -> CMatN<D> {
        rk4(&self.fields[index], mu, self.steps, stride)
    }
}

/// Transport along one path with step doubling until the error estimate meets `opts.tol`.
pub fn transport<const D: usize>(
    form: &LaurentForm<D>,
    mu: C64,
    path: Path,
    opts: &TransportOptions,
) -> Result<TransportResult<D>> {
    if mu.norm() == 0.0 || !mu.is_finite() {
        return Err(Error::InvalidParams("mu must be a finite nonzero complex number".into()));
    }
    let mut steps = opts.steps.max(form.spectral.min_line_samples(path.a, path.b).div_ceil(2)).next_multiple_of(2);
    loop {
        let eng = HolonomyEngine::new(form, &[path], steps)?;
        let r = eng.transport(0, mu);
        if r.error_estimate <= opts.tol {
            return Ok(r);
        }
        if 2 * steps > opts.max_steps {
            return Err(Error::TransportAccuracy { estimate: r.error_estimate, tol: opts.tol });
        }
        steps *= 2;
    }
}

pub fn holonomy_pair<const D: usize>(
    form: &LaurentForm<D>,
    mu: C64,
    base: (f64, f64),
    opts: &TransportOptions,
) -> Result<(TransportResult<D>, TransportResult<D>)> {
    Ok((
        transport(form, mu, Path::generator(base, 1, 0), opts)?,
        transport(form, mu, Path::generator(base, 0, 1), opts)?,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions {
    /// Relative distance below which eigenvalues are treated as equal.
    pub tol_eig: f64,
    /// Singular values below this (relative to `max(1, |H|)`) count as zero.
    pub tol_rank: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions { tol_eig: 1e-6, tol_rank: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenStructure {
    /// All eigenvalues, sorted by argument then modulus.
    pub eigenvalues: Vec<C64>,
    /// Distinct eigenvalue clusters with algebraic multiplicities.
    pub clusters: Vec<(C64, usize)>,
    pub unit_multiplicity: usize,
    pub unit_geometric: usize,
    pub rank1: usize,
    pub rank2: usize,
}

pub fn eigenvalues<const D: usize>(h: &CMatN<D>) -> Vec<C64> {
    let dm = DMatrix::from_iterator(D, D, h.iter().copied());
    let schur = dm.schur();
    let (_, t) = schur.unpack();
    let mut ev: Vec<C64> = (0..D).map(|i| t[(i, i)]).collect();
    sort_eigenvalues(&mut ev);
    ev
}

pub fn det<const D: usize>(h: &CMatN<D>) -> C64 {
    DMatrix::from_iterator(D, D, h.iter().copied()).determinant()
}

pub fn sort_eigenvalues(ev: &mut [C64]) {
    ev.sort_by(|a, b| a.arg().total_cmp(&b.arg()).then(a.norm().total_cmp(&b.norm())));
}

pub fn numerical_rank(m: &DMatrix<C64>, tol: f64) -> usize {
    let sv = m.singular_values();
    sv.iter().filter(|s| **s > tol).count()
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

pub fn eigen_structure<const D: usize>(h: &CMatN<D>, opts: &EigenOptions) -> EigenStructure {
    let ev = eigenvalues(h);
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for &e in &ev {
        if let Some(c) = clusters.iter_mut().find(|c| close(c.0 / c.1 as f64, e, opts.tol_eig)) {
            c.0 += e;
            c.1 += 1;
        } else {
            clusters.push((e, 1));
        }
    }
    for c in clusters.iter_mut() {
        c.0 /= c.1 as f64;
    }
    let one = C64::new(1.0, 0.0);
    let unit_multiplicity = ev.iter().filter(|e| close(**e, one, opts.tol_eig)).count();
    let hm = DMatrix::from_iterator(D, D, h.iter().copied());
    let a = &hm - DMatrix::<C64>::identity(D, D);
    let scale = hm.norm().max(1.0);
    let rank1 = numerical_rank(&a, opts.tol_rank * scale);
    let rank2 = numerical_rank(&(&a * &a), opts.tol_rank * scale * scale);
    EigenStructure { eigenvalues: ev, clusters, unit_multiplicity, unit_geometric: D - rank1, rank1, rank2 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    I,
    II,
    IIIa,
    IIIb,
    Undetermined,
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Case::I => "I",
            Case::II => "II",
            Case::IIIa => "IIIa",
            Case::IIIb => "IIIb",
            Case::Undetermined => "Undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleEvidence {
    pub mu: C64,
    /// Lattice combination with the most distinct eigenvalues.
    pub generator: (i64, i64),
    pub eigen: EigenStructure,
    pub pattern: Case,
    pub det_drift: f64,
    pub commutator_norm: f64,
    pub error_estimate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseLabel {
    pub label: Case,
    pub evidence: Vec<SampleEvidence>,
    /// Non-empty when a persistent unit eigenvalue has odd multiplicity.
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    pub transport: TransportOptions,
    pub eigen: EigenOptions,
    pub base: (f64, f64),
    /// Largest fraction of samples allowed to be inconclusive.
    pub max_degenerate: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            transport: TransportOptions::default(),
            eigen: EigenOptions::default(),
            base: (0.0, 0.0),
            max_degenerate: 0.25,
        }
    }
}

/// `n` samples on `|mu| = r`, starting at a small angular offset.
pub fn circle_samples(r: f64, n: usize) -> Vec<C64> {
    (0..n).map(|k| C64::from_polar(r, 2.0 * std::f64::consts::PI * (k as f64 + 0.37) / n as f64)).collect()
}

/// Pattern of a 4x4 holonomy according to its eigenvalue and Jordan data.
pub fn sample_pattern(e: &EigenStructure, identity_norm: f64, tol: f64) -> Case {
    let distinct = e.clusters.len();
    if identity_norm < tol {
        return Case::IIIa;
    }
    if e.unit_multiplicity == 4 && e.rank1 == 2 && e.rank2 == 0 {
        return Case::IIIb;
    }
    if e.unit_multiplicity == 0 && distinct == 4 {
        return Case::I;
    }
    if e.unit_multiplicity == 2 && e.unit_geometric == 2 && distinct == 3 {
        return Case::II;
    }
    Case::Undetermined
}

fn sample_evidence<const D: usize>(eng: &HolonomyEngine<D>, mu: C64, opts: &ClassifyOptions) -> SampleEvidence {
    let results: Vec<TransportResult<D>> = (0..eng.paths.len()).map(|i| eng.transport(i, mu)).collect();
    let structures: Vec<EigenStructure> = results.iter().map(|r| eigen_structure(&r.h, &opts.eigen)).collect();
    let best = (0..results.len()).max_by_key(|&i| (structures[i].clusters.len(), usize::MAX - i)).unwrap_or(0);
    let (h1, h2) = (results[0].h, results[1].h);
    let comm = (h1 * h2 - h2 * h1).norm();
    let det_drift = results.iter().map(|r| (det(&r.h) - 1.0).norm()).fold(0.0, f64::max);
    let err = results.iter().map(|r| r.error_estimate).fold(0.0, f64::max);
    let id_norm = results.iter().map(|r| (r.h - CMatN::<D>::identity()).norm()).fold(0.0, f64::max);
    let mut pattern = sample_pattern(&structures[best], id_norm, opts.eigen.tol_rank);
    // nilpotent structure has to show on every generator
    if pattern == Case::IIIb && !structures.iter().all(|s| s.unit_multiplicity == D && s.rank2 == 0) {
        pattern = Case::Undetermined;
    }
    SampleEvidence {
        mu,
        generator: results[best].generator,
        eigen: structures[best].clone(),
        pattern,
        det_drift,
        commutator_norm: comm,
        error_estimate: err,
    }
}

/// Classifies by unanimity over the non-degenerate samples.
pub fn classify(form: &LaurentForm<4>, mus: &[C64], opts: &ClassifyOptions) -> Result<CaseLabel> {
    if mus.len() < 8 {
        return Err(Error::InvalidParams(format!("classification needs >= 8 samples, got {}", mus.len())));
    }
    if mus.iter().any(|m| (m - 1.0).norm() < 1e-8 || m.norm() < 1e-12) {
        return Err(Error::InvalidParams("samples must avoid mu = 0 and mu = 1".into()));
    }
    let mut evidence = refined_evidence(form, mus, opts)?;
    evidence.sort_by(|a, b| a.mu.arg().total_cmp(&b.mu.arg()).then(a.mu.norm().total_cmp(&b.mu.norm())));
    Ok(decide(evidence))
}

/// Evidence at every sample, doubling the step count until the transport tolerance holds.
pub fn refined_evidence(form: &LaurentForm<4>, mus: &[C64], opts: &ClassifyOptions) -> Result<Vec<SampleEvidence>> {
    let need = form.spectral.min_line_samples(1, 1).div_ceil(2).next_multiple_of(2);
    let mut steps = opts.transport.steps.max(need);
    loop {
        let eng = HolonomyEngine::generators(form, opts.base, steps)?;
        let evidence: Vec<SampleEvidence> = mus.par_iter().map(|&mu| sample_evidence(&eng, mu, opts)).collect();
        let worst = evidence.iter().map(|e| e.error_estimate).fold(0.0, f64::max);
        if worst <= opts.transport.tol {
            return Ok(evidence);
        }
        if 2 * steps > opts.transport.max_steps {
            return Err(Error::TransportAccuracy { estimate: worst, tol: opts.transport.tol });
        }
        steps *= 2;
    }
}

fn decide(evidence: Vec<SampleEvidence>) -> CaseLabel {
    let mut notes = Vec::new();
    let decided: Vec<Case> = evidence.iter().map(|e| e.pattern).filter(|p| *p != Case::Undetermined).collect();
    let degenerate = evidence.len() - decided.len();
    let mut label = if decided.is_empty() || degenerate as f64 > 0.25 * evidence.len() as f64 {
        notes.push(format!("{degenerate} of {} samples inconclusive", evidence.len()));
        Case::Undetermined
    } else if decided.iter().all(|p| *p == decided[0]) {
        decided[0]
    } else {
        notes.push("samples disagree".into());
        Case::Undetermined
    };
    let persistent = evidence.iter().all(|e| e.eigen.unit_multiplicity > 0);
    if persistent && evidence.iter().any(|e| e.eigen.unit_multiplicity % 2 == 1) {
        notes.push("persistent unit eigenvalue with odd multiplicity: resolution failure".into());
        label = Case::Undetermined;
    }
    CaseLabel { label, evidence, notes }
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeCheck {
    pub mu: C64,
    /// `|G H_dual G^-1 - H|` at the base point.
    pub matrix_residual: f64,
    pub spectrum_distance: f64,
    /// Distance between the dual spectrum and the reciprocal primal spectrum.
    pub reciprocal_distance: f64,
}

/// Compares primal and dual holonomy along `path` through the gauge at the path start.
pub fn gauge_check(
    primal: &LaurentForm<4>,
    dual: &LaurentForm<4>,
    s_base: &crate::quat::QMat2,
    mu: C64,
    path: Path,
    opts: &TransportOptions,
) -> Result<GaugeCheck> {
    let h = transport(primal, mu, path, opts)?.h;
    let hd = transport(dual, mu, path, opts)?.h;
    let g = crate::family::gauge_matrix(s_base, mu)?;
    let gi = g.try_inverse().ok_or(Error::SingularGauge { cond: f64::INFINITY })?;
    let (e, ed) = (eigenvalues(&h), eigenvalues(&hd));
    let recip: Vec<C64> = e.iter().map(|z| z.inv()).collect();
    Ok(GaugeCheck {
        mu,
        matrix_residual: (g * hd * gi - h).norm(),
        spectrum_distance: multiset_distance(&ed, &e),
        reciprocal_distance: multiset_distance(&ed, &recip),
    })
}

/// Hausdorff distance between two finite point sets in the plane.
pub fn hausdorff(a: &[C64], b: &[C64]) -> f64 {
    let d = |x: &[C64], y: &[C64]| {
        x.iter().map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    d(a, b).max(d(b, a))
}

/// Distance between eigenvalue multisets, matching greedily after sorting.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for p in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, q)| (j, (p - q).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((0, f64::INFINITY));
        if j < used.len() {
            used[j] = true;
        }
        worst = worst.max(d);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{connection_form, MuForm};
    use crate::moebius::{apply_eta, hopf_fields, mean_curvature_sphere, Ambient, EtaPolicy};
    use crate::quat::CMat4;
    use crate::surface::{builtin_surface, sample_frames, BuiltinKind};

    fn clifford(n: usize, rho: f64) -> MuForm {
        let fg = sample_frames(&builtin_surface(&BuiltinKind::Clifford).unwrap(), n, n).unwrap();
        let sg = mean_curvature_sphere(&fg);
        let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::CmcRho { rho, ambient: Ambient::S3 }, &fg, &sg).unwrap();
        connection_form(&cg, &sg)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_at_mu_one() {
        let mf = clifford(32, 0.0);
        let r = transport(&mf, c(1.0, 0.0), Path::generator((0.0, 0.0), 1, 0), &TransportOptions::default()).unwrap();
        assert!((r.h - CMat4::identity()).norm() < 1e-14);
    }

    #[test]
    fn reversed_path_inverts() {
        let mf = clifford(32, 0.3);
        let opts = TransportOptions::default();
        let p = Path::generator((0.1, 0.2), 0, 1);
        let fwd = transport(&mf, c(0.5, 0.3), p, &opts).unwrap();
        let back = transport(&mf, c(0.5, 0.3), p.reversed(), &opts).unwrap();
        assert!((back.h * fwd.h - CMat4::identity()).norm() < 1e-10);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let mf = clifford(32, 0.3);
        let mu = c(0.3, 0.4);
        let eng = HolonomyEngine::new(&mf, &[Path::generator((0.0, 0.0), 1, 0)], 512).unwrap();
        let reference = eng.transport_with_steps(0, mu, 1);
        let errs: Vec<f64> = [32, 16, 8].iter().map(|&s| (eng.transport_with_steps(0, mu, s) - reference).norm()).collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio.log2() - 4.0).abs() < 0.3, "{errs:?}");
        }
    }

    #[test]
    fn unimodular_and_commuting() {
        let mf = clifford(32, 0.0);
        for mu in circle_samples(0.5, 4) {
            let (a, b) = holonomy_pair(&mf, mu, (0.0, 0.0), &TransportOptions::default()).unwrap();
            assert!((a.h.determinant() - 1.0).norm() < 1e-8);
            assert!((a.h * b.h - b.h * a.h).norm() < 1e-8);
        }
    }

    #[test]
    fn base_point_change_conjugates() {
        let mf = clifford(32, 0.0);
        let mu = c(0.2, 0.45);
        let opts = TransportOptions::default();
        let h0 = transport(&mf, mu, Path::generator((0.0, 0.0), 1, 0), &opts).unwrap().h;
        let h1 = transport(&mf, mu, Path::generator((0.31, 0.57), 1, 0), &opts).unwrap().h;
        assert!(multiset_distance(&eigenvalues(&h0), &eigenvalues(&h1)) < 1e-7);
    }

    #[test]
    fn eigen_structure_examples() {
        let e = eigen_structure(&CMat4::identity(), &EigenOptions::default());
        assert_eq!((e.unit_multiplicity, e.rank1, e.rank2, e.clusters.len()), (4, 0, 0, 1));

        let mut j = CMat4::identity();
        j[(0, 1)] = c(1.0, 0.0);
        j[(2, 2)] = c(2.0, 0.0);
        j[(3, 3)] = c(0.5, 0.0);
        let e = eigen_structure(&j, &EigenOptions::default());
        assert_eq!((e.unit_multiplicity, e.unit_geometric, e.rank1), (2, 1, 3));

        let th: f64 = 0.7;
        let d = CMat4::from_diagonal(&nalgebra::Vector4::new(c(2.0, 0.0), c(0.5, 0.0), C64::from_polar(1.0, th), C64::from_polar(1.0, -th)));
        let e = eigen_structure(&d, &EigenOptions::default());
        assert_eq!(e.clusters.len(), 4);
        assert!(e.clusters.iter().all(|c| c.1 == 1));
    }

    #[test]
    fn patterns() {
        let o = EigenOptions::default();
        let id = CMat4::identity();
        assert_eq!(sample_pattern(&eigen_structure(&id, &o), 0.0, 1e-6), Case::IIIa);
        let mut n = CMat4::identity();
        n[(0, 2)] = c(1.0, 0.0);
        n[(1, 3)] = c(1.0, 0.0);
        assert_eq!(sample_pattern(&eigen_structure(&n, &o), 1.4, 1e-6), Case::IIIb);
        let d2 = CMat4::from_diagonal(&nalgebra::Vector4::new(c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.0)));
        assert_eq!(sample_pattern(&eigen_structure(&d2, &o), 1.0, 1e-6), Case::II);
    }

    #[test]
    fn hausdorff_and_multisets() {
        let a = [c(1.0, 0.0), c(2.0, 0.0)];
        let b = [c(2.0, 0.0), c(1.0, 1e-9)];
        assert!(hausdorff(&a, &b) < 1e-8 && multiset_distance(&a, &b) < 1e-8);
        let a = [c(1.0, 0.0), c(1.0, 0.0)];
        let b = [c(1.0, 0.0), c(3.0, 0.0)];
        assert!(multiset_distance(&a, &b) > 1.0);
    }

    #[test]
    fn clifford_cases() {
        let mf0 = clifford(32, 0.0);
        let mus = circle_samples(0.5, 8);
        let opts = ClassifyOptions::default();
        let l0 = classify(&mf0, &mus, &opts).unwrap();
        assert_eq!(l0.label, Case::I, "{:?}", l0.evidence.iter().map(|e| &e.eigen.eigenvalues).collect::<Vec<_>>());
        for rho in [0.5, -0.5] {
            let l = classify(&clifford(32, rho), &mus, &opts).unwrap();
            assert_eq!(l.label, Case::II, "{:?}", l.evidence.iter().map(|e| &e.eigen.eigenvalues).collect::<Vec<_>>());
        }
    }

    #[test]
    fn quaternionic_symmetry_of_spectra() {
        let mf = clifford(32, 0.3);
        let o = TransportOptions::default();
        let p = Path::generator((0.0, 0.0), 0, 1);
        for mu in circle_samples(0.5, 4) {
            let e: Vec<C64> = eigenvalues(&transport(&mf, mu, p, &o).unwrap().h).iter().map(|z| z.conj()).collect();
            let es = eigenvalues(&transport(&mf, mu.conj().inv(), p, &o).unwrap().h);
            assert!(hausdorff(&e, &es) < 1e-7 && multiset_distance(&e, &es) < 1e-7);
        }
    }

    #[test]
    fn dual_family_is_gauge_equivalent() {
        let fg = sample_frames(&builtin_surface(&BuiltinKind::Homogeneous { r: 0.6 }).unwrap(), 32, 32).unwrap();
        let sg = mean_curvature_sphere(&fg);
        let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::CmcRho { rho: 0.3, ambient: Ambient::S3 }, &fg, &sg).unwrap();
        let (mf, df) = (connection_form(&cg, &sg), crate::family::dual_family(&cg, &sg));
        for mu in [c(0.3, 0.4), c(-0.2, 0.45), c(1.5, -0.7)] {
            let g = gauge_check(&mf, &df, &sg.s[0], mu, Path::generator((0.0, 0.0), 1, 0), &TransportOptions::default()).unwrap();
            assert!(g.matrix_residual < 1e-8, "{g:?}");
            assert!(g.spectrum_distance < 1e-7 && g.reciprocal_distance < 1e-7, "{g:?}");
        }
    }

    #[test]
    fn zero_form_is_trivial() {
        let mf = MuForm::zero(16, 16, crate::surface::TorusLattice::new(c(1.0, 0.0), c(0.0, 1.0)).unwrap());
        let l = classify(&mf, &circle_samples(0.5, 8), &ClassifyOptions::default()).unwrap();
        assert_eq!(l.label, Case::IIIa);
    }

    #[test]
    fn classify_rejects_bad_samples() {
        let mf = clifford(16, 0.0);
        assert!(classify(&mf, &circle_samples(0.5, 4), &ClassifyOptions::default()).is_err());
        let mut mus = circle_samples(0.5, 8);
        mus[0] = c(1.0, 0.0);
        assert!(classify(&mf, &mus, &ClassifyOptions::default()).is_err());
    }
}
