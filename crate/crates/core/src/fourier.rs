//! Trigonometric interpolation on the periodic grid of a torus.
//!
//! Grids are indexed by lattice coordinates `(s, t) in [0,1)^2`, point `(i, j)`
//! sitting at `s = i / n1`, `t = j / n2`, stored row-major as `i * n2 + j`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::quat::C64;

/// Cached FFT plans for an `n1 x n2` periodic grid.
#[derive(Clone)]
pub struct Spectral {
    pub n1: usize,
    pub n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Spectral({}x{})", self.n1, self.n2)
    }
}

/// Signed frequency of FFT index `k` on `n` points; the Nyquist index maps to `n/2`.
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if 2 * k <= n {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Frequency used for differentiation (Nyquist mode dropped).
fn deriv_freq(k: usize, n: usize) -> f64 {
    if n.is_multiple_of(2) && 2 * k == n {
        0.0
    } else {
        signed_freq(k, n) as f64
    }
}

impl Spectral {
    pub fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        }
    }

    fn transform(&self, data: &mut [C64], along1: &Arc<dyn Fft<f64>>, along2: &Arc<dyn Fft<f64>>) {
        let (n1, n2) = (self.n1, self.n2);
        for row in data.chunks_mut(n2) {
            along2.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); n1];
        for j in 0..n2 {
            for i in 0..n1 {
                col[i] = data[i * n2 + j];
            }
            along1.process(&mut col);
            for i in 0..n1 {
                data[i * n2 + j] = col[i];
            }
        }
    }

    /// Normalized Fourier coefficients: `field(s,t) = sum c[k1,k2] e^{2 pi i (k1 s + k2 t)}`.
    pub fn forward(&self, field: &[C64]) -> Vec<C64> {
        assert_eq!(field.len(), self.n1 * self.n2);
        let mut data = field.to_vec();
        self.transform(&mut data, &self.fwd1, &self.fwd2);
        let norm = 1.0 / (self.n1 * self.n2) as f64;
        data.iter_mut().for_each(|c| *c *= norm);
        data
    }

    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut data = coeffs.to_vec();
        self.transform(&mut data, &self.inv1, &self.inv2);
        data
    }

    /// Partial derivatives with respect to the lattice coordinates `s` and `t`.
    pub fn deriv_st(&self, field: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let c = self.forward(field);
        let (n1, n2) = (self.n1, self.n2);
        let mut cs = c.clone();
        let mut ct = c;
        for i in 0..n1 {
            let k1 = 2.0 * PI * deriv_freq(i, n1);
            for j in 0..n2 {
                let k2 = 2.0 * PI * deriv_freq(j, n2);
                let idx = i * n2 + j;
                cs[idx] *= C64::new(0.0, k1);
                ct[idx] *= C64::new(0.0, k2);
            }
        }
        (self.inverse(&cs), self.inverse(&ct))
    }

    /// Values of the trigonometric interpolant at an arbitrary point.
    pub fn eval(&self, coeffs: &[C64], s: f64, t: f64) -> C64 {
        let (n1, n2) = (self.n1, self.n2);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n1 {
            for (f1, w1) in split_modes(i, n1) {
                let p1 = f1 * s;
                for j in 0..n2 {
                    for (f2, w2) in split_modes(j, n2) {
                        let ph = 2.0 * PI * (p1 + f2 * t);
                        acc += coeffs[i * n2 + j] * C64::from_polar(w1 * w2, ph);
                    }
                }
            }
        }
        acc
    }

    /// Smallest sample count that resolves every mode along direction `(a, b)`.
    pub fn min_line_samples(&self, a: i64, b: i64) -> usize {
        (a.unsigned_abs() as usize * self.n1 + b.unsigned_abs() as usize * self.n2) + 2
    }

    /// Samples the interpolant along `(s0 + a u, t0 + b u)` at `u = k / m`, `k = 0..m`.
    ///
    /// `a, b` are integers so the restriction is 1-periodic in `u`.
    pub fn line_samples(&self, coeffs: &[C64], s0: f64, t0: f64, a: i64, b: i64, m: usize) -> Vec<C64> {
        assert!(m >= self.min_line_samples(a, b), "line sampling would alias");
        let (n1, n2) = (self.n1, self.n2);
        let mut spec = vec![C64::new(0.0, 0.0); m];
        for i in 0..n1 {
            for (f1, w1) in split_modes(i, n1) {
                for j in 0..n2 {
                    let c = coeffs[i * n2 + j];
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (f2, w2) in split_modes(j, n2) {
                        let q = (f1 as i64) * a + (f2 as i64) * b;
                        let ph = 2.0 * PI * (f1 * s0 + f2 * t0);
                        let idx = q.rem_euclid(m as i64) as usize;
                        spec[idx] += c * C64::from_polar(w1 * w2, ph);
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(m).process(&mut spec);
        spec
    }

    /// [`Spectral::line_samples`] for several fields sharing one path.
    pub fn line_samples_many(&self, coeffs: &[&[C64]], s0: f64, t0: f64, a: i64, b: i64, m: usize) -> Vec<Vec<C64>> {
        assert!(m >= self.min_line_samples(a, b), "line sampling would alias");
        let (n1, n2) = (self.n1, self.n2);
        let mut modes: Vec<(usize, usize, C64)> = Vec::with_capacity(4 * n1 * n2);
        for i in 0..n1 {
            for (f1, w1) in split_modes(i, n1) {
                for j in 0..n2 {
                    for (f2, w2) in split_modes(j, n2) {
                        let q = (f1 as i64) * a + (f2 as i64) * b;
                        let ph = 2.0 * PI * (f1 * s0 + f2 * t0);
                        modes.push((i * n2 + j, q.rem_euclid(m as i64) as usize, C64::from_polar(w1 * w2, ph)));
                    }
                }
            }
        }
        let plan = FftPlanner::new().plan_fft_inverse(m);
        coeffs
            .iter()
            .map(|c| {
                let mut spec = vec![C64::new(0.0, 0.0); m];
                for &(src, dst, w) in &modes {
                    spec[dst] += c[src] * w;
                }
                plan.process(&mut spec);
                spec
            })
            .collect()
    }
}

/// Frequencies (with weights) represented by FFT index `k`; the Nyquist mode is split evenly.
fn split_modes(k: usize, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let nyq = n.is_multiple_of(2) && 2 * k == n;
    let f = signed_freq(k, n) as f64;
    let first = if nyq { (f, 0.5) } else { (f, 1.0) };
    let second = if nyq { Some((-f, 0.5)) } else { None };
    std::iter::once(first).chain(second)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n1: usize, n2: usize, f: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        let mut v = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            for j in 0..n2 {
                v.push(f(i as f64 / n1 as f64, j as f64 / n2 as f64));
            }
        }
        v
    }

    #[test]
    fn derivative_of_trig_polynomial_is_exact() {
        let sp = Spectral::new(16, 12);
        let f = |s: f64, t: f64| C64::from_polar(1.0, 2.0 * PI * (3.0 * s - 2.0 * t)) + (2.0 * PI * t).cos();
        let field = sample(16, 12, f);
        let (ds, dt) = sp.deriv_st(&field);
        let want_s = sample(16, 12, |s, t| C64::new(0.0, 6.0 * PI) * C64::from_polar(1.0, 2.0 * PI * (3.0 * s - 2.0 * t)));
        let want_t = sample(16, 12, |s, t| {
            C64::new(0.0, -4.0 * PI) * C64::from_polar(1.0, 2.0 * PI * (3.0 * s - 2.0 * t)) - 2.0 * PI * (2.0 * PI * t).sin()
        });
        for k in 0..ds.len() {
            assert!((ds[k] - want_s[k]).norm() < 1e-11);
            assert!((dt[k] - want_t[k]).norm() < 1e-11);
        }
    }

    #[test]
    fn line_samples_follow_the_interpolant() {
        let sp = Spectral::new(8, 8);
        let f = |s: f64, t: f64| C64::from_polar(1.0, 2.0 * PI * (s + 2.0 * t)) + C64::new((2.0 * PI * s).sin(), 0.0);
        let c = sp.forward(&sample(8, 8, f));
        let (s0, t0) = (0.13, 0.71);
        let m = 64;
        let line = sp.line_samples(&c, s0, t0, 1, -1, m);
        for (k, v) in line.iter().enumerate() {
            let u = k as f64 / m as f64;
            let want = f(s0 + u, t0 - u);
            assert!((v - want).norm() < 1e-12, "k={k}");
            assert!((sp.eval(&c, s0 + u, t0 - u) - want).norm() < 1e-12);
        }
    }
}
