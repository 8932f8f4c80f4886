//! Holonomy spectral curve: characteristic polynomials over the μ-plane,
//! trivial-factor stripping, branch points, sheet monodromy and genus.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{CMatN, LaurentForm};
use crate::holonomy::{eigenvalues, multiset_distance, HolonomyEngine, Path, TransportOptions};
use crate::quat::C64;

/// Coefficients are stored in ascending order: `c[0] + c[1] x + ... + c[n] x^n`.
pub type Poly = Vec<C64>;

/// Monic characteristic polynomial `det(x - H)` by Faddeev-LeVerrier.
pub fn char_poly<const D: usize>(h: &CMatN<D>) -> Poly {
    let mut c = vec![C64::new(0.0, 0.0); D + 1];
    c[D] = C64::new(1.0, 0.0);
    let mut m = CMatN::<D>::zeros();
    for k in 1..=D {
        m = h * m + CMatN::<D>::identity() * c[D - k + 1];
        c[D - k] = -(h * m).trace() / k as f64;
    }
    c
}

pub fn poly_eval(c: &[C64], x: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, a| acc * x + a)
}

pub fn poly_from_roots(roots: &[C64]) -> Poly {
    let mut c = vec![C64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

/// Roots of a polynomial with nonzero leading coefficient via its companion matrix.
pub fn poly_roots(c: &[C64]) -> Vec<C64> {
    let n = c.len() - 1;
    match n {
        0 => vec![],
        1 => vec![-c[0] / c[1]],
        2 => {
            let (a, b, cc) = (c[2], c[1], c[0]);
            let d = (b * b - a * cc * 4.0).sqrt();
            let q = if (b.conj() * d).re >= 0.0 { -(b + d) / 2.0 } else { -(b - d) / 2.0 };
            if q.norm() == 0.0 {
                vec![C64::new(0.0, 0.0); 2]
            } else {
                vec![q / a, cc / q]
            }
        }
        _ => {
            let mut m = DMatrix::<C64>::zeros(n, n);
            for i in 1..n {
                m[(i, i - 1)] = C64::new(1.0, 0.0);
            }
            for i in 0..n {
                m[(i, n - 1)] = -c[i] / c[n];
            }
            m.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
        }
    }
}

/// Coefficients of `p(x + a)`.
pub fn taylor_shift(c: &[C64], a: C64) -> Poly {
    let mut out = c.to_vec();
    let n = out.len();
    for i in 0..n {
        for j in (i..n - 1).rev() {
            let t = out[j + 1] * a;
            out[j] += t;
        }
    }
    out
}

/// Discriminant up to a constant factor: product of squared root differences.
pub fn discriminant(c: &[C64]) -> C64 {
    if c.len() == 3 {
        return c[1] * c[1] - c[0] * c[2] * 4.0;
    }
    let r = poly_roots(c);
    let mut d = C64::new(1.0, 0.0);
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            d *= (r[i] - r[j]) * (r[i] - r[j]);
        }
    }
    d
}

/// Removes the factor `(λ - 1)^k` from a monic polynomial in λ.
pub fn strip_trivial(poly: &[C64], k: usize, tol: f64) -> Result<Poly> {
    let shifted = taylor_shift(poly, C64::new(1.0, 0.0));
    let (reduced, residual) = strip_shifted(&shifted, k);
    if residual > tol {
        return Err(Error::TrivialFactor { expected: k, residual });
    }
    Ok(taylor_shift(&reduced, C64::new(-1.0, 0.0)))
}

/// Drops the `k` lowest coefficients of a monic polynomial in `x = λ - 1`;
/// the residual is their size relative to the root scale.
fn strip_shifted(c: &[C64], k: usize) -> (Poly, f64) {
    let n = c.len() - 1;
    let scale = (0..n).map(|i| c[i].norm().powf(1.0 / (n - i) as f64)).fold(0.0, f64::max).max(1e-300);
    let residual = (0..k).map(|i| c[i].norm() / scale.powi((n - i) as i32)).fold(0.0, f64::max);
    (c[k..].to_vec(), residual)
}

/// Sheet structure of the curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CurveShape {
    pub sheets: usize,
    pub trivial: usize,
}

impl CurveShape {
    pub fn from_case(dim: usize, case: crate::holonomy::Case) -> Result<Self> {
        use crate::holonomy::Case;
        match (dim, case) {
            (2, _) => Ok(CurveShape { sheets: 2, trivial: 0 }),
            (4, Case::I) => Ok(CurveShape { sheets: 4, trivial: 0 }),
            (4, Case::II) => Ok(CurveShape { sheets: 2, trivial: 2 }),
            _ => Err(Error::Precondition(format!("no nontrivial spectral curve for case {case}"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub transport: TransportOptions,
    /// Bound on the relative size of stripped coefficients.
    pub tol_strip: f64,
    pub tol_eig: f64,
    pub base: (f64, f64),
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { transport: TransportOptions::default(), tol_strip: 1e-6, tol_eig: 1e-6, base: (0.0, 0.0) }
    }
}

/// Holonomy along a chosen generator together with the two lattice generators.
pub struct SpectralCurve<'a, const D: usize> {
    pub form: &'a LaurentForm<D>,
    pub shape: CurveShape,
    pub generator: (i64, i64),
    pub opts: SpectralOptions,
    engine: HolonomyEngine<D>,
}

#[derive(Clone, Debug)]
pub struct Holonomies<const D: usize> {
    pub h: CMatN<D>,
    pub h1: CMatN<D>,
    pub h2: CMatN<D>,
    pub error_estimate: f64,
}

impl<'a, const D: usize> SpectralCurve<'a, D> {
    /// `probes` should include the extreme |μ| of the intended sweep.
    pub fn new(
        form: &'a LaurentForm<D>,
        shape: CurveShape,
        generator: (i64, i64),
        probes: &[C64],
        opts: SpectralOptions,
    ) -> Result<Self> {
        if generator == (0, 0) {
            return Err(Error::InvalidParams("generator must be nonzero".into()));
        }
        if shape.sheets + shape.trivial != D {
            return Err(Error::InvalidParams(format!("shape {shape:?} does not fit dimension {D}")));
        }
        let paths = [
            Path::generator(opts.base, generator.0, generator.1),
            Path::generator(opts.base, 1, 0),
            Path::generator(opts.base, 0, 1),
        ];
        let engine = HolonomyEngine::calibrated(form, &paths, probes, &opts.transport)?;
        Ok(SpectralCurve { form, shape, generator, opts, engine })
    }

    pub fn steps(&self) -> usize {
        self.engine.steps
    }

    pub fn holonomies(&self, mu: C64) -> Holonomies<D> {
        let r: Vec<_> = (0..3).map(|i| self.engine.transport(i, mu)).collect();
        let err = r.iter().map(|t| t.error_estimate).fold(0.0, f64::max);
        Holonomies { h: r[0].h, h1: r[1].h, h2: r[2].h, error_estimate: err }
    }

    pub fn holonomy(&self, mu: C64) -> CMatN<D> {
        self.engine.transport(0, mu).h
    }

    /// Reduced polynomial in `x = λ - 1` with its stripping residual.
    pub fn reduced_shifted(&self, h: &CMatN<D>) -> (Poly, f64) {
        strip_shifted(&char_poly(&(h - CMatN::<D>::identity())), self.shape.trivial)
    }

    /// Nontrivial eigenvalues at `mu`.
    pub fn sheets_at(&self, mu: C64) -> Vec<C64> {
        let (red, _) = self.reduced_shifted(&self.holonomy(mu));
        poly_roots(&red).into_iter().map(|x| x + 1.0).collect()
    }

    pub fn discriminant_at(&self, mu: C64) -> C64 {
        let (red, _) = self.reduced_shifted(&self.holonomy(mu));
        discriminant(&red)
    }

    pub fn sample(&self, mu: C64) -> Result<SpectralSample> {
        let hs = self.holonomies(mu);
        let mut flags = Vec::new();
        if hs.error_estimate > self.opts.transport.tol {
            flags.push("transport".to_string());
        }
        let quartic = char_poly(&hs.h);
        let (red_x, residual) = self.reduced_shifted(&hs.h);
        if residual > self.opts.tol_strip {
            return Err(Error::TrivialFactor { expected: self.shape.trivial, residual });
        }
        let mut sheets: Vec<C64> = poly_roots(&red_x).into_iter().map(|x| x + 1.0).collect();
        crate::holonomy::sort_eigenvalues(&mut sheets);
        let all = eigenvalues(&hs.h);
        let det = all.iter().fold(C64::new(1.0, 0.0), |a, b| a * b);
        let multipliers = sheets
            .iter()
            .map(|&l| common_eigenvector(&hs, l).map(|m| (m.h1, m.h2)).unwrap_or((C64::new(f64::NAN, 0.0), C64::new(f64::NAN, 0.0))))
            .collect::<Vec<_>>();
        if multipliers.iter().any(|m| !m.0.is_finite()) {
            flags.push("multiplier".to_string());
        }
        Ok(SpectralSample {
            mu,
            quartic,
            reduced: taylor_shift(&red_x, C64::new(-1.0, 0.0)),
            k_trivial: self.shape.trivial,
            eigenvalues: sheets,
            all_eigenvalues: all,
            multipliers,
            det_drift: (det - 1.0).norm(),
            strip_residual: residual,
            flags,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSample {
    pub mu: C64,
    /// `det(λ - H)` ascending.
    pub quartic: Poly,
    /// Nontrivial factor in λ, ascending.
    pub reduced: Poly,
    pub k_trivial: usize,
    /// Nontrivial eigenvalues in continuation order.
    pub eigenvalues: Vec<C64>,
    pub all_eigenvalues: Vec<C64>,
    /// `(h(γ1), h(γ2))` per nontrivial eigenline.
    pub multipliers: Vec<(C64, C64)>,
    pub det_drift: f64,
    pub strip_residual: f64,
    pub flags: Vec<String>,
}

impl SpectralSample {
    fn permute(&mut self, perm: &[usize]) {
        self.eigenvalues = perm.iter().map(|&i| self.eigenvalues[i]).collect();
        if self.multipliers.len() == perm.len() {
            self.multipliers = perm.iter().map(|&i| self.multipliers[i]).collect();
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Multiplier<const D: usize> {
    pub mu: C64,
    pub lambda: C64,
    pub h1: C64,
    pub h2: C64,
    #[serde(skip)]
    pub vector: SVector<C64, D>,
    /// `max |H_k v - h_k v|` for unit `v`.
    pub residual: f64,
}

fn null_vector<const D: usize>(m: &CMatN<D>) -> SVector<C64, D> {
    let dm = DMatrix::from_iterator(D, D, m.iter().copied());
    let svd = dm.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (imin, _) = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap_or((0, &0.0));
    SVector::<C64, D>::from_iterator((0..D).map(|j| vt[(imin, j)].conj()))
}

/// Eigenvector of `H` for `lambda` refined by one inverse-iteration step, with its multipliers.
fn common_eigenvector<const D: usize>(hs: &Holonomies<D>, lambda: C64) -> Result<Multiplier<D>> {
    let shifted = hs.h - CMatN::<D>::identity() * lambda;
    let mut v = null_vector(&shifted);
    let nudge = CMatN::<D>::identity() * C64::new(1e-10 * (1.0 + lambda.norm()), 0.0);
    if let Some(w) = (shifted - nudge).try_inverse().map(|inv| inv * v) {
        if w.norm().is_finite() && w.norm() > 0.0 {
            v = w;
        }
    }
    v /= C64::from(v.norm());
    let rq = |m: &CMatN<D>| (v.adjoint() * m * v)[(0, 0)];
    let (h1, h2) = (rq(&hs.h1), rq(&hs.h2));
    let residual = [(hs.h, lambda), (hs.h1, h1), (hs.h2, h2)]
        .iter()
        .map(|(m, l)| (m * v - v * *l).norm())
        .fold(0.0, f64::max);
    Ok(Multiplier { mu: C64::new(f64::NAN, 0.0), lambda, h1, h2, vector: v, residual })
}

/// Common eigenline of the generator holonomies for the `index`-th nontrivial eigenvalue
/// (sorted by argument then modulus).
pub fn eigenline_multiplier<const D: usize>(curve: &SpectralCurve<D>, mu: C64, index: usize) -> Result<Multiplier<D>> {
    let hs = curve.holonomies(mu);
    let mut sheets = curve.sheets_at(mu);
    crate::holonomy::sort_eigenvalues(&mut sheets);
    let lambda = *sheets
        .get(index)
        .ok_or_else(|| Error::InvalidParams(format!("eigen index {index} out of range 0..{}", sheets.len())))?;
    let sep = eigenvalues(&hs.h)
        .iter()
        .map(|e| (e - lambda).norm())
        .filter(|d| *d > curve.opts.tol_eig * lambda.norm().max(1.0))
        .fold(f64::INFINITY, f64::min);
    let mult = eigenvalues(&hs.h).iter().filter(|e| (*e - lambda).norm() <= curve.opts.tol_eig * lambda.norm().max(1.0)).count();
    if mult != 1 || sep < 1e-4 {
        return Err(Error::Precondition(format!("eigenvalue {lambda} at mu = {mu} is not simple")));
    }
    let mut m = common_eigenvector(&hs, lambda)?;
    m.mu = mu;
    let scale = hs.h1.norm().max(hs.h2.norm()).max(1.0);
    if m.residual > 1e-6 * scale {
        return Err(Error::NotCommon { defect: m.residual });
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSpec {
    pub rmin: f64,
    pub rmax: f64,
    pub circles: usize,
    pub samples: usize,
    /// Samples closer than this to μ = 1 are dropped.
    pub exclusion: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { rmin: 0.5, rmax: 2.0, circles: 5, samples: 32, exclusion: 1e-2 }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rmin > 0.0 && self.rmax >= self.rmin && self.rmax.is_finite()) {
            return Err(Error::InvalidParams(format!("bad annulus [{}, {}]", self.rmin, self.rmax)));
        }
        if self.circles == 0 || self.samples < 3 || self.exclusion <= 0.0 {
            return Err(Error::InvalidParams("sweep needs >= 1 circle, >= 3 samples and a positive exclusion".into()));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.circles == 1 {
            return vec![(self.rmin * self.rmax).sqrt()];
        }
        let (a, b) = (self.rmin.ln(), self.rmax.ln());
        (0..self.circles).map(|i| (a + (b - a) * i as f64 / (self.circles - 1) as f64).exp()).collect()
    }

    /// Sample angles sit at half-steps so the positive real axis is never sampled.
    pub fn circle(&self, r: f64) -> Vec<C64> {
        (0..self.samples)
            .map(|k| C64::from_polar(r, 2.0 * PI * (k as f64 + 0.5) / self.samples as f64))
            .filter(|m| (m - 1.0).norm() >= self.exclusion)
            .collect()
    }

    pub fn probes(&self) -> Vec<C64> {
        vec![C64::new(-self.rmin, 0.0), C64::new(-self.rmax, 0.0)]
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best assignment of `next` onto `prev` (result[i] indexes `next`) and whether the
/// runner-up assignment is within a factor 2 of it.
pub fn match_roots(prev: &[C64], next: &[C64]) -> (Vec<usize>, bool) {
    let n = prev.len();
    let mut costs: Vec<(f64, Vec<usize>)> = permutations(n)
        .into_iter()
        .map(|p| ((0..n).map(|i| (prev[i] - next[p[i]]).norm()).fold(0.0, f64::max), p))
        .collect();
    costs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ambiguous = n > 1 && costs[1].0 < 2.0 * costs[0].0;
    (costs.swap_remove(0).1, ambiguous)
}

/// Continues `roots` (sheets at `a`) to `b` along the straight segment, refining
/// the step until every match is unambiguous. Returns the permutation of the sheets at `b`.
pub fn continue_segment<const D: usize>(curve: &SpectralCurve<D>, a: C64, roots: &[C64], b: C64, at_b: &[C64]) -> (Vec<usize>, bool) {
    let (perm, ambiguous) = match_roots(roots, at_b);
    if !ambiguous {
        return (perm, false);
    }
    let mut n = 4;
    while n <= 256 {
        let mut cur = roots.to_vec();
        let mut ok = true;
        for k in 1..n {
            let next = curve.sheets_at(a + (b - a) * (k as f64 / n as f64));
            let (p, amb) = match_roots(&cur, &next);
            if amb {
                ok = false;
                break;
            }
            cur = p.iter().map(|&i| next[i]).collect();
        }
        if ok {
            let (p, amb) = match_roots(&cur, at_b);
            if !amb {
                return (p, false);
            }
        }
        n *= 4;
    }
    (perm, true)
}

/// Samples the annulus circle by circle, ordering sheets by continuation along each
/// circle and stitching circles radially through their first samples.
pub fn sample_curve<const D: usize>(curve: &SpectralCurve<D>, sweep: &SweepSpec) -> Result<Vec<SpectralSample>> {
    sweep.validate()?;
    let circles: Vec<Vec<C64>> = sweep.radii().into_iter().map(|r| sweep.circle(r)).collect();
    let mut tracked: Vec<Vec<SpectralSample>> = circles
        .par_iter()
        .map(|mus| {
            let mut out: Vec<SpectralSample> = Vec::with_capacity(mus.len());
            for &mu in mus {
                let mut s = curve.sample(mu)?;
                if let Some(prev) = out.last() {
                    let (perm, ambiguous) = continue_segment(curve, prev.mu, &prev.eigenvalues, mu, &s.eigenvalues);
                    s.permute(&perm);
                    if ambiguous {
                        s.flags.push("tracking".into());
                    }
                }
                out.push(s);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    for k in 1..tracked.len() {
        let (head, tail) = tracked.split_at_mut(k);
        let (Some(prev), Some(first)) = (head[k - 1].first(), tail[0].first()) else { continue };
        let (perm, ambiguous) = continue_segment(curve, prev.mu, &prev.eigenvalues, first.mu, &first.eigenvalues);
        for s in tail[0].iter_mut() {
            s.permute(&perm);
            if ambiguous {
                s.flags.push("stitching".into());
            }
        }
    }
    Ok(tracked.into_iter().flatten().collect())
}

/// Largest jump of the characteristic coefficients along each circle relative to the median jump.
pub fn tracking_sanity(samples: &[SpectralSample]) -> f64 {
    let mut jumps = Vec::new();
    for w in samples.windows(2) {
        if (w[0].mu.norm() - w[1].mu.norm()).abs() > 1e-12 {
            continue;
        }
        let d = w[0].quartic.iter().zip(&w[1].quartic).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        jumps.push(d);
    }
    if jumps.is_empty() {
        return 0.0;
    }
    let mut sorted = jumps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2].max(1e-300);
    sorted[sorted.len() - 1] / median
}

/// Distance between each sample and the conjugated sample at `1 / conj(μ)`, over pairs present in the set.
pub fn involution_residual_samples(samples: &[SpectralSample]) -> f64 {
    let mut worst: f64 = 0.0;
    for s in samples {
        let target = s.mu.conj().inv();
        if let Some(t) = samples.iter().find(|t| (t.mu - target).norm() < 1e-9 * target.norm().max(1.0)) {
            let conj: Vec<C64> = s.all_eigenvalues.iter().map(|z| z.conj()).collect();
            worst = worst.max(multiset_distance(&conj, &t.all_eigenvalues));
        }
    }
    worst
}

/// Permutation of sheets after continuing once around the circle `|μ - center| = radius`.
/// Entry `i` is the starting sheet that sheet `i` ends on.
pub fn sheet_monodromy<const D: usize>(curve: &SpectralCurve<D>, center: C64, radius: f64) -> Result<Vec<usize>> {
    let mut n = 64;
    loop {
        match continue_loop(curve, center, radius, n) {
            Some(p) => return Ok(p),
            None if n < 4096 => n *= 2,
            None => return Err(Error::Continuation { mu_re: center.re, mu_im: center.im }),
        }
    }
}

fn continue_loop<const D: usize>(curve: &SpectralCurve<D>, center: C64, radius: f64, n: usize) -> Option<Vec<usize>> {
    let pts: Vec<C64> = (0..=n).map(|k| center + C64::from_polar(radius, 2.0 * PI * k as f64 / n as f64)).collect();
    let roots: Vec<Vec<C64>> = pts.par_iter().map(|&m| curve.sheets_at(m)).collect();
    let start = roots[0].clone();
    let mut cur = start.clone();
    for r in &roots[1..] {
        let (perm, ambiguous) = match_roots(&cur, r);
        if ambiguous {
            return None;
        }
        cur = perm.iter().map(|&i| r[i]).collect();
    }
    let (perm, ambiguous) = match_roots(&start, &cur);
    if ambiguous {
        return None;
    }
    let mut out = vec![0; perm.len()];
    for (i, &j) in perm.iter().enumerate() {
        out[j] = i;
    }
    Some(out)
}

/// Sum of `(cycle length - 1)` over the cycles of `perm`.
pub fn ramification(perm: &[usize]) -> usize {
    let mut seen = vec![false; perm.len()];
    let mut total = 0;
    for i in 0..perm.len() {
        if seen[i] {
            continue;
        }
        let mut len = 0;
        let mut j = i;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        total += len - 1;
    }
    total
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPoint {
    pub mu: C64,
    /// Winding of the discriminant around the finest enclosing cell.
    pub winding: i64,
    pub permutation: Vec<usize>,
    pub order: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BranchOptions {
    /// Radial cells (odd, so that |μ| = 1 is interior on symmetric annuli).
    pub radial: usize,
    pub angular: usize,
    pub pos_tol: f64,
    pub loop_radius: f64,
    /// Zeros closer than this are merged and tested as one.
    pub cluster_radius: f64,
    pub exclusion: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        BranchOptions { radial: 5, angular: 24, pos_tol: 1e-8, loop_radius: 1e-3, cluster_radius: 1e-4, exclusion: 1e-2 }
    }
}

#[derive(Clone, Copy, Debug)]
struct Cell {
    l0: f64,
    l1: f64,
    t0: f64,
    t1: f64,
}

impl Cell {
    fn at(&self, l: f64, t: f64) -> C64 {
        C64::from_polar(l.exp(), t)
    }

    fn contains(&self, mu: C64) -> bool {
        let (l, mut t) = (mu.norm().ln(), mu.arg());
        while t < self.t0 {
            t += 2.0 * PI;
        }
        while t >= self.t0 + 2.0 * PI {
            t -= 2.0 * PI;
        }
        l > self.l0 && l < self.l1 && t > self.t0 && t < self.t1
    }

    fn diameter(&self) -> f64 {
        let r = self.l1.exp();
        (self.l1.exp() - self.l0.exp()).max(r * (self.t1 - self.t0))
    }

    fn boundary_distance(&self, mu: C64) -> f64 {
        let corners = [self.at(self.l0, self.t0), self.at(self.l1, self.t0), self.at(self.l1, self.t1), self.at(self.l0, self.t1)];
        let (l, t) = (mu.norm().ln(), mu.arg());
        let radial = (l - self.l0).abs().min((self.l1 - l).abs()) * mu.norm();
        let angular = (t - self.t0).abs().min((self.t1 - t).abs()) * mu.norm();
        corners.iter().map(|c| (c - mu).norm()).fold(radial.min(angular), f64::min)
    }

    fn split(&self) -> [Cell; 4] {
        const F: f64 = 0.4871;
        let lm = self.l0 + F * (self.l1 - self.l0);
        let tm = self.t0 + F * (self.t1 - self.t0);
        [
            Cell { l0: self.l0, l1: lm, t0: self.t0, t1: tm },
            Cell { l0: lm, l1: self.l1, t0: self.t0, t1: tm },
            Cell { l0: self.l0, l1: lm, t0: tm, t1: self.t1 },
            Cell { l0: lm, l1: self.l1, t0: tm, t1: self.t1 },
        ]
    }
}

fn arg_step(a: C64, b: C64) -> f64 {
    (b / a).arg()
}

/// Phase increment of `f` along `t -> path(t)`, bisecting until consecutive steps stay below π/4.
fn phase_along(f: &dyn Fn(C64) -> C64, path: &dyn Fn(f64) -> C64, t0: f64, t1: f64, v0: C64, v1: C64, depth: usize) -> Option<f64> {
    if !(v0.is_finite() && v1.is_finite()) || v0.norm() == 0.0 || v1.norm() == 0.0 {
        return None;
    }
    let d = arg_step(v0, v1);
    if depth >= 2 && d.abs() < PI / 4.0 {
        return Some(d);
    }
    if depth > 14 {
        return None;
    }
    let tm = 0.5 * (t0 + t1);
    let vm = f(path(tm));
    Some(phase_along(f, path, t0, tm, v0, vm, depth + 1)? + phase_along(f, path, tm, t1, vm, v1, depth + 1)?)
}

fn cell_winding(f: &(dyn Fn(C64) -> C64 + Sync), c: &Cell) -> Option<i64> {
    let corners = [(c.l0, c.t0), (c.l1, c.t0), (c.l1, c.t1), (c.l0, c.t1)];
    let vals: Vec<C64> = corners.iter().map(|&(l, t)| f(c.at(l, t))).collect();
    let mut total = 0.0;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let path = move |s: f64| c.at(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1));
        total += phase_along(f, &path, 0.0, 1.0, vals[e], vals[(e + 1) % 4], 0)?;
    }
    Some((total / (2.0 * PI)).round() as i64)
}

fn circle_winding(f: &(dyn Fn(C64) -> C64 + Sync), center: C64, radius: f64) -> Option<i64> {
    let path = move |s: f64| center + C64::from_polar(radius, 2.0 * PI * s);
    let mut total = 0.0;
    let n = 8;
    for k in 0..n {
        let (s0, s1) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
        total += phase_along(f, &path, s0, s1, f(path(s0)), f(path(s1)), 0)?;
    }
    Some((total / (2.0 * PI)).round() as i64)
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchSearch {
    pub branch_points: Vec<BranchPoint>,
    /// Discriminant zeros without sheet exchange.
    pub singular_points: Vec<BranchPoint>,
    /// Cells whose winding could not be resolved.
    pub unresolved: Vec<C64>,
    /// Winding left over in the cell around μ = 1 after removing the exclusion disk.
    pub excluded_winding: i64,
}

/// Merges zeros within `radius` of each other, summing windings.
fn cluster(points: Vec<(C64, i64)>, radius: f64) -> Vec<(C64, i64)> {
    let mut groups: Vec<(Vec<C64>, i64)> = Vec::new();
    for (p, w) in points {
        match groups.iter_mut().find(|g| g.0.iter().any(|q| (q - p).norm() < radius)) {
            Some(g) => {
                g.0.push(p);
                g.1 += w;
            }
            None => groups.push((vec![p], w)),
        }
    }
    groups
        .into_iter()
        .filter(|g| g.1 != 0)
        .map(|(pts, w)| (pts.iter().sum::<C64>() / pts.len() as f64, w))
        .collect()
}

/// Discriminant zeros in the annulus by argument principle on polar cells and bisection,
/// each classified by its sheet monodromy.
pub fn branch_points<const D: usize>(curve: &SpectralCurve<D>, rmin: f64, rmax: f64, opts: &BranchOptions) -> Result<BranchSearch> {
    if !(rmin > 0.0 && rmax > rmin) || opts.radial == 0 || opts.angular < 4 {
        return Err(Error::InvalidParams("branch search needs 0 < rmin < rmax, >= 1 radial and >= 4 angular cells".into()));
    }
    let one = C64::new(1.0, 0.0);
    let (a, b) = (rmin.ln(), rmax.ln());
    let dt = 2.0 * PI / opts.angular as f64;
    let cells: Vec<Cell> = (0..opts.radial)
        .flat_map(|i| {
            (0..opts.angular).map(move |j| Cell {
                l0: a + (b - a) * i as f64 / opts.radial as f64,
                l1: a + (b - a) * (i + 1) as f64 / opts.radial as f64,
                t0: -0.5 * dt + j as f64 * dt,
                t1: 0.5 * dt + j as f64 * dt,
            })
        })
        .collect();
    let disc = |m: C64| curve.discriminant_at(m);
    let hole = cells.iter().find(|c| c.contains(one)).copied();
    let eps = match hole {
        Some(c) => {
            let d = c.boundary_distance(one);
            if d < 2.0 * opts.exclusion {
                return Err(Error::InvalidParams(format!(
                    "mu = 1 is within {d:.3e} of the cell boundary; use a symmetric annulus with an odd number of radial cells"
                )));
            }
            opts.exclusion
        }
        None => opts.exclusion,
    };
    let hole_winding = match hole {
        Some(_) => circle_winding(&disc, one, eps).ok_or(Error::Continuation { mu_re: 1.0, mu_im: 0.0 })?,
        None => 0,
    };

    let mut found: Vec<(C64, i64)> = Vec::new();
    let mut unresolved = Vec::new();
    let mut excluded_winding = 0;
    let mut stack: Vec<(Cell, i64)> = Vec::new();
    let windings: Vec<Option<i64>> = cells.par_iter().map(|c| cell_winding(&disc, c)).collect();
    for (c, w) in cells.iter().zip(windings) {
        match w {
            None => unresolved.push(c.at(0.5 * (c.l0 + c.l1), 0.5 * (c.t0 + c.t1))),
            Some(w) => {
                let w = if c.contains(one) { w - hole_winding } else { w };
                if w != 0 {
                    stack.push((*c, w));
                }
            }
        }
    }
    while let Some((c, parent_w)) = stack.pop() {
        let holed = c.contains(one);
        if holed && c.diameter() < 8.0 * eps {
            excluded_winding += parent_w;
            continue;
        }
        let centre = c.at(0.5 * (c.l0 + c.l1), 0.5 * (c.t0 + c.t1));
        if c.diameter() < opts.pos_tol {
            found.push((centre, parent_w));
            continue;
        }
        let kids = c.split();
        let ws: Vec<Option<i64>> = kids.par_iter().map(|k| cell_winding(&disc, k)).collect();
        // below the noise floor the children stop resolving the zero
        if ws.iter().any(|w| w.is_none()) {
            found.push((centre, parent_w));
            continue;
        }
        let ws: Vec<i64> = kids.iter().zip(ws).map(|(k, w)| w.unwrap_or(0) - if k.contains(one) { hole_winding } else { 0 }).collect();
        if ws.iter().sum::<i64>() != parent_w {
            found.push((centre, parent_w));
            continue;
        }
        for (k, w) in kids.iter().zip(ws) {
            if w != 0 {
                stack.push((*k, w));
            }
        }
    }
    let found = cluster(found, opts.cluster_radius);
    let mut found = found;
    found.sort_by(|x, y| x.0.arg().total_cmp(&y.0.arg()).then(x.0.norm().total_cmp(&y.0.norm())));

    let classified: Vec<Result<BranchPoint>> = found
        .par_iter()
        .map(|&(mu, winding)| {
            let mut r = opts.loop_radius.min(0.3 * (mu - one).norm()).min(0.3 * mu.norm());
            for (other, _) in &found {
                let d = (other - mu).norm();
                if d > 0.0 {
                    r = r.min(0.3 * d);
                }
            }
            let permutation = sheet_monodromy(curve, mu, r)?;
            let order = ramification(&permutation);
            Ok(BranchPoint { mu, winding, permutation, order })
        })
        .collect();
    let mut branch = Vec::new();
    let mut singular = Vec::new();
    for bp in classified {
        let bp = bp?;
        if bp.order > 0 {
            branch.push(bp);
        } else {
            singular.push(bp);
        }
    }
    Ok(BranchSearch { branch_points: branch, singular_points: singular, unresolved, excluded_winding })
}

/// Largest distance from a point to the nearest image of another point under μ ↦ 1/conj(μ).
pub fn involution_residual(points: &[C64]) -> f64 {
    points
        .iter()
        .map(|p| {
            let q = p.conj().inv();
            points.iter().map(|x| (x - q).norm()).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Genus {
    Exact { genus: u32 },
    Interval { lo: u32, hi: u32 },
}

/// Genus from the total ramification `b` over ℂ*.
/// Two sheets: one branch point over each of 0 and ∞ is added.
/// Four sheets: Riemann-Hurwitz with unknown ramification over 0 and ∞.
pub fn genus_from_branching(shape: CurveShape, b: usize) -> Genus {
    match shape.sheets {
        2 => {
            if b.is_multiple_of(2) {
                Genus::Exact { genus: (b / 2) as u32 }
            } else {
                Genus::Interval { lo: ((b - 1) / 2) as u32, hi: b.div_ceil(2) as u32 }
            }
        }
        n => {
            let mut lo = u32::MAX;
            let mut hi = 0u32;
            let max_r = n - 1;
            for r0 in 0..=max_r {
                for r1 in 0..=max_r {
                    let total = b + r0 + r1;
                    if total % 2 == 1 || total + 2 < 2 * n {
                        continue;
                    }
                    let g = ((total + 2 - 2 * n) / 2) as u32;
                    lo = lo.min(g);
                    hi = hi.max(g);
                }
            }
            if lo == hi {
                Genus::Exact { genus: lo }
            } else {
                Genus::Interval { lo, hi }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub generator: (i64, i64),
    pub shape: CurveShape,
    pub steps: usize,
    pub samples: Vec<SpectralSample>,
    pub branch_points: Vec<BranchPoint>,
    pub singular_points: Vec<BranchPoint>,
    pub genus: Genus,
    pub stable: bool,
    /// Sheet permutations around `|μ| = rmin` and `|μ| = rmax`.
    pub inner_monodromy: Option<Vec<usize>>,
    pub outer_monodromy: Option<Vec<usize>>,
    /// Closure of the branch set under μ ↦ 1/conj(μ).
    pub branch_involution: f64,
    /// Closure of samples and all discriminant zeros under the involution.
    pub involution_residual: f64,
    pub tracking_jump: f64,
    pub diagnostics: Vec<String>,
}

/// Branch detection at two resolutions; a stable count gives the genus, otherwise an interval.
pub fn genus_estimate(shape: CurveShape, coarse: &BranchSearch, fine: &BranchSearch, pos_tol: f64) -> (Genus, bool) {
    let count = |s: &BranchSearch| s.branch_points.iter().map(|b| b.order).sum::<usize>();
    let (bc, bf) = (count(coarse), count(fine));
    let positions_agree = coarse.branch_points.len() == fine.branch_points.len()
        && coarse
            .branch_points
            .iter()
            .all(|p| fine.branch_points.iter().any(|q| (p.mu - q.mu).norm() < pos_tol));
    let stable = bc == bf && positions_agree && coarse.unresolved.is_empty() && fine.unresolved.is_empty();
    if stable {
        (genus_from_branching(shape, bf), true)
    } else {
        let (g1, g2) = (genus_from_branching(shape, bc), genus_from_branching(shape, bf));
        let bounds = |g: Genus| match g {
            Genus::Exact { genus } => (genus, genus),
            Genus::Interval { lo, hi } => (lo, hi),
        };
        let ((a, b), (c, d)) = (bounds(g1), bounds(g2));
        (Genus::Interval { lo: a.min(c), hi: b.max(d) }, false)
    }
}

pub fn spectral_report<const D: usize>(
    curve: &SpectralCurve<D>,
    sweep: &SweepSpec,
    branch: &BranchOptions,
) -> Result<SpectralReport> {
    let samples = sample_curve(curve, sweep)?;
    let coarse = branch_points(curve, sweep.rmin, sweep.rmax, branch)?;
    let finer = BranchOptions { radial: 2 * branch.radial + 1, angular: 2 * branch.angular, ..*branch };
    let fine = branch_points(curve, sweep.rmin, sweep.rmax, &finer)?;
    let (genus, stable) = genus_estimate(curve.shape, &coarse, &fine, 1e-6);
    let zero = C64::new(0.0, 0.0);
    let inner_monodromy = sheet_monodromy(curve, zero, sweep.rmin).ok();
    let outer_monodromy = sheet_monodromy(curve, zero, sweep.rmax).ok();
    let mut diagnostics = Vec::new();
    if !fine.unresolved.is_empty() {
        diagnostics.push(format!("{} unresolved cells", fine.unresolved.len()));
    }
    if fine.excluded_winding != 0 {
        diagnostics.push(format!("discriminant winding {} inside the exclusion near mu = 1", fine.excluded_winding));
    }
    for flag in ["transport", "multiplier", "tracking", "stitching"] {
        let n = samples.iter().filter(|s| s.flags.iter().any(|f| f == flag)).count();
        if n > 0 {
            diagnostics.push(format!("{n} samples flagged {flag}"));
        }
    }
    let mut pts: Vec<C64> = fine.branch_points.iter().map(|b| b.mu).collect();
    pts.extend(fine.singular_points.iter().map(|b| b.mu));
    let symmetric = (sweep.rmin * sweep.rmax - 1.0).abs() < 1e-12;
    let inv_points = if symmetric { involution_residual(&pts) } else { 0.0 };
    let bp: Vec<C64> = fine.branch_points.iter().map(|b| b.mu).collect();
    let branch_involution = if symmetric { involution_residual(&bp) } else { 0.0 };
    let involution = inv_points.max(involution_residual_samples(&samples));
    Ok(SpectralReport {
        generator: curve.generator,
        shape: curve.shape,
        steps: curve.steps(),
        tracking_jump: tracking_sanity(&samples),
        samples,
        branch_points: fine.branch_points,
        singular_points: fine.singular_points,
        genus,
        stable,
        inner_monodromy,
        outer_monodromy,
        branch_involution,
        involution_residual: involution,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::MuForm;
    use crate::holonomy::{circle_samples, classify, Case, ClassifyOptions};
    use crate::moebius::{apply_eta, hopf_fields, mean_curvature_sphere, Ambient, EtaPolicy};
    use crate::quat::CMat4;
    use crate::surface::{builtin_surface, sample_frames, BuiltinKind};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn clifford(n: usize, rho: f64) -> MuForm {
        let fg = sample_frames(&builtin_surface(&BuiltinKind::Clifford).unwrap(), n, n).unwrap();
        let sg = mean_curvature_sphere(&fg);
        let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::CmcRho { rho, ambient: Ambient::S3 }, &fg, &sg).unwrap();
        crate::family::connection_form(&cg, &sg)
    }

    #[test]
    fn char_poly_matches_roots() {
        let d = CMat4::from_diagonal(&nalgebra::Vector4::new(c(2.0, 0.0), c(0.5, 0.0), c(0.0, 1.0), c(1.0, 1.0)));
        let p = char_poly(&d);
        let q = poly_from_roots(&[c(2.0, 0.0), c(0.5, 0.0), c(0.0, 1.0), c(1.0, 1.0)]);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).norm() < 1e-14);
        }
        let r = poly_roots(&p);
        assert!(multiset_distance(&r, &[c(2.0, 0.0), c(0.5, 0.0), c(0.0, 1.0), c(1.0, 1.0)]) < 1e-12);
    }

    #[test]
    fn shift_round_trip() {
        let p = poly_from_roots(&[c(1.0, 2.0), c(-0.5, 0.1), c(3.0, 0.0)]);
        let q = taylor_shift(&taylor_shift(&p, c(0.7, -0.2)), c(-0.7, 0.2));
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!((poly_eval(&taylor_shift(&p, c(2.0, 0.0)), c(1.0, 0.0)) - poly_eval(&p, c(3.0, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn strip_examples() {
        let one = c(1.0, 0.0);
        let p = poly_from_roots(&[one, one, c(2.0, 0.0), c(0.5, 0.0)]);
        let r = strip_trivial(&p, 2, 1e-9).unwrap();
        assert_eq!(r.len(), 3);
        assert!(multiset_distance(&poly_roots(&r), &[c(2.0, 0.0), c(0.5, 0.0)]) < 1e-12);
        let q = poly_from_roots(&[c(0.3, 0.1), c(2.0, 0.0), c(0.5, 0.0), c(-1.0, 0.0)]);
        assert_eq!(strip_trivial(&q, 0, 1e-9).unwrap().len(), 5);
        let bad = poly_from_roots(&[one, c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        assert!(matches!(strip_trivial(&bad, 2, 1e-6), Err(Error::TrivialFactor { expected: 2, .. })));
    }

    #[test]
    fn discriminant_vanishes_on_double_roots() {
        let p = poly_from_roots(&[c(1.0, 1.0), c(1.0, 1.0), c(2.0, 0.0), c(0.0, 3.0)]);
        assert!(discriminant(&p).norm() < 1e-10);
        let q = poly_from_roots(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!((discriminant(&q) - 4.0).norm() < 1e-14);
    }

    #[test]
    fn ramification_counts() {
        assert_eq!(ramification(&[0, 1, 2, 3]), 0);
        assert_eq!(ramification(&[1, 0, 2, 3]), 1);
        assert_eq!(ramification(&[1, 2, 0, 3]), 2);
        assert_eq!(ramification(&[1, 0, 3, 2]), 2);
    }

    #[test]
    fn genus_rules() {
        let two = CurveShape { sheets: 2, trivial: 2 };
        assert_eq!(genus_from_branching(two, 0), Genus::Exact { genus: 0 });
        assert_eq!(genus_from_branching(two, 4), Genus::Exact { genus: 2 });
        let four = CurveShape { sheets: 4, trivial: 0 };
        assert!(matches!(genus_from_branching(four, 6), Genus::Interval { lo: 0, hi: 3 }));
    }

    #[test]
    fn matching_detects_ambiguity() {
        let a = [c(1.0, 0.0), c(2.0, 0.0)];
        let (p, amb) = match_roots(&a, &[c(2.01, 0.0), c(0.99, 0.0)]);
        assert_eq!(p, vec![1, 0]);
        assert!(!amb);
        let (_, amb) = match_roots(&a, &[c(1.5, 0.0), c(1.5, 0.1)]);
        assert!(amb);
    }

    #[test]
    fn vacuum_case_two_curve() {
        let mf = clifford(32, 0.5);
        let shape = CurveShape { sheets: 2, trivial: 2 };
        let sweep = SweepSpec { circles: 3, samples: 16, ..SweepSpec::default() };
        let curve = SpectralCurve::new(&mf, shape, (1, 0), &sweep.probes(), SpectralOptions::default()).unwrap();
        let samples = sample_curve(&curve, &sweep).unwrap();
        for s in &samples {
            assert!(s.det_drift < 1e-8);
            let prod = s.eigenvalues[0] * s.eigenvalues[1];
            assert!((prod - 1.0).norm() < 1e-8, "{prod}");
            let rec = poly_from_roots(&s.eigenvalues);
            assert!(rec.iter().zip(&s.reduced).all(|(a, b)| (a - b).norm() < 1e-8));
        }
        assert!(involution_residual_samples(&samples) < 1e-7);
        let near = curve.sheets_at(c(1.0 + 1e-3, 1e-3));
        assert!(near.iter().all(|l| (l - 1.0).norm() < 1e-1));
    }

    /// Constant form with `Omega_x = s [[0, u], [v, 0]]`,
    /// `u = (mu - 1)(1 - d/mu)`, `v = (mu - 1)(c - 1/mu)`: holonomy eigenvalues
    /// `exp(±nu)` with `nu^2 = s^2 u v`, branched at `mu = d` and `mu = 1/c`.
    fn synthetic(d: C64, cc: C64, s: f64) -> LaurentForm<2> {
        use crate::family::CMatN;
        let n = 8;
        let lat = crate::surface::TorusLattice::new(c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        let sc = C64::from(s);
        let p = CMatN::<2>::new(c(0.0, 0.0), sc, sc * cc, c(0.0, 0.0));
        let m = CMatN::<2>::new(c(0.0, 0.0), sc * d, sc, c(0.0, 0.0));
        let z = vec![CMatN::<2>::zeros(); n * n];
        LaurentForm::new(n, n, lat, vec![p; n * n], z.clone(), vec![m; n * n], z)
    }

    #[test]
    fn synthetic_branch_points_match_closed_form() {
        let d = C64::from_polar(0.7, 0.5);
        let cc = C64::from_polar(1.3, 1.0).inv();
        let form = synthetic(d, cc, 0.3);
        let shape = CurveShape { sheets: 2, trivial: 0 };
        let curve = SpectralCurve::new(&form, shape, (1, 0), &[c(-0.5, 0.0), c(-2.0, 0.0)], SpectralOptions::default()).unwrap();
        // closed-form eigenvalues at a sample
        let mu = c(0.4, 1.1);
        let nu = (C64::from(0.09) * (mu - 1.0) * (mu - 1.0) * (1.0 - d / mu) * (cc - mu.inv())).sqrt();
        assert!(multiset_distance(&curve.sheets_at(mu), &[(-nu).exp(), nu.exp()]) < 1e-9);

        let found = branch_points(&curve, 0.5, 2.0, &BranchOptions::default()).unwrap();
        assert!(found.singular_points.is_empty() && found.unresolved.is_empty(), "{found:?}");
        let pts: Vec<C64> = found.branch_points.iter().map(|b| b.mu).collect();
        assert!(multiset_distance(&pts, &[d, cc.inv()]) < 1e-6, "{pts:?}");
        assert!(found.branch_points.iter().all(|b| b.permutation == vec![1, 0] && b.winding == 1));
        assert_eq!(sheet_monodromy(&curve, c(0.3, -0.9), 1e-2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn multipliers_are_common_eigenlines() {
        let mf = clifford(32, 0.0);
        let shape = CurveShape { sheets: 4, trivial: 0 };
        let curve = SpectralCurve::new(&mf, shape, (1, 1), &[c(-2.0, 0.0)], SpectralOptions::default()).unwrap();
        let mu = c(0.3, 0.35);
        let mut ok = 0;
        for i in 0..4 {
            if let Ok(m) = eigenline_multiplier(&curve, mu, i) {
                assert!(m.residual < 1e-8);
                assert!((m.h1 * m.h2 - m.lambda).norm() < 1e-8);
                let mi = eigenline_multiplier(&curve, mu.conj().inv(), 0).unwrap();
                assert!(mi.residual < 1e-8);
                ok += 1;
            }
        }
        assert!(ok >= 2);
        assert!(eigenline_multiplier(&curve, mu, 9).is_err());
    }

    #[test]
    fn case_label_selects_shape() {
        let mf = clifford(16, 0.5);
        let label = classify(&mf, &circle_samples(0.5, 8), &ClassifyOptions::default()).unwrap();
        assert_eq!(CurveShape::from_case(4, label.label).unwrap(), CurveShape { sheets: 2, trivial: 2 });
        assert!(CurveShape::from_case(4, Case::IIIa).is_err());
    }
}
