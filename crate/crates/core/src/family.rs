//! The associated family `d + Omega(mu)` with `Omega(mu) = (mu - 1) P + (1/mu - 1) M`,
//! stored as Laurent coefficient fields `P`, `M` per grid point and direction.
//!
//! Parallel sections satisfy `d psi = -Omega(mu) psi`.

use std::sync::OnceLock;

use nalgebra::SMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::Spectral;
use crate::moebius::{CircleGrid, SphereCongruenceGrid};
use crate::quat::{embed_qmat, CMat4, C64, I};
use crate::surface::TorusLattice;

pub type CMatN<const D: usize> = SMatrix<C64, D, D>;

/// Laurent coefficients of a `mu`-family of `D x D` connection forms on a torus grid.
#[derive(Debug)]
pub struct LaurentForm<const D: usize> {
    pub n1: usize,
    pub n2: usize,
    pub lattice: TorusLattice,
    pub px: Vec<CMatN<D>>,
    pub py: Vec<CMatN<D>>,
    pub mx: Vec<CMatN<D>>,
    pub my: Vec<CMatN<D>>,
    pub spectral: Spectral,
    coeffs: OnceLock<Vec<Vec<C64>>>,
}

impl<const D: usize> Clone for LaurentForm<D> {
    fn clone(&self) -> Self {
        Self::new(self.n1, self.n2, self.lattice, self.px.clone(), self.py.clone(), self.mx.clone(), self.my.clone())
    }
}

pub type MuForm = LaurentForm<4>;

/// `Omega` sampled along a straight path, with its `P` and `M` parts kept apart.
#[derive(Clone, Debug)]
pub struct PathField<const D: usize> {
    pub p: Vec<CMatN<D>>,
    pub m: Vec<CMatN<D>>,
}

impl<const D: usize> PathField<D> {
    pub fn omega(&self, k: usize, mu: C64) -> CMatN<D> {
        self.p[k] * (mu - 1.0) + self.m[k] * (mu.inv() - 1.0)
    }
}

pub fn laurent(p: &CMatN<4>, m: &CMatN<4>, mu: C64) -> CMatN<4> {
    p * (mu - 1.0) + m * (mu.inv() - 1.0)
}

impl<const D: usize> LaurentForm<D> {
    pub fn new(
        n1: usize,
        n2: usize,
        lattice: TorusLattice,
        px: Vec<CMatN<D>>,
        py: Vec<CMatN<D>>,
        mx: Vec<CMatN<D>>,
        my: Vec<CMatN<D>>,
    ) -> Self {
        LaurentForm { n1, n2, lattice, px, py, mx, my, spectral: Spectral::new(n1, n2), coeffs: OnceLock::new() }
    }

    pub fn zero(n1: usize, n2: usize, lattice: TorusLattice) -> Self {
        let z = vec![CMatN::<D>::zeros(); n1 * n2];
        Self::new(n1, n2, lattice, z.clone(), z.clone(), z.clone(), z)
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        (i % self.n1) * self.n2 + (j % self.n2)
    }

    /// `Omega(mu)` at grid point `k` applied to the tangent vector `(vx, vy)`.
    pub fn omega(&self, k: usize, vx: f64, vy: f64, mu: C64) -> CMatN<D> {
        let p = self.px[k] * C64::new(vx, 0.0) + self.py[k] * C64::new(vy, 0.0);
        let m = self.mx[k] * C64::new(vx, 0.0) + self.my[k] * C64::new(vy, 0.0);
        p * (mu - 1.0) + m * (mu.inv() - 1.0)
    }

    /// `(Omega_x, Omega_y)` at every grid point.
    pub fn eval(&self, mu: C64) -> (Vec<CMatN<D>>, Vec<CMatN<D>>) {
        let (a, b) = (mu - 1.0, mu.inv() - 1.0);
        let x = (0..self.len()).map(|k| self.px[k] * a + self.mx[k] * b).collect();
        let y = (0..self.len()).map(|k| self.py[k] * a + self.my[k] * b).collect();
        (x, y)
    }

    fn coefficients(&self) -> &Vec<Vec<C64>> {
        self.coeffs.get_or_init(|| {
            let fields = [&self.px, &self.py, &self.mx, &self.my];
            let jobs: Vec<(usize, usize)> = (0..4).flat_map(|f| (0..D * D).map(move |e| (f, e))).collect();
            jobs.par_iter()
                .map(|&(f, e)| {
                    let v: Vec<C64> = fields[f].iter().map(|m| m[(e / D, e % D)]).collect();
                    self.spectral.forward(&v)
                })
                .collect()
        })
    }

    /// Samples of `P`, `M` applied to the velocity of `t -> (s0 + a t, t0 + b t)` at `t = k / m`, `k = 0..=m`.
    pub fn path_field(&self, s0: f64, t0: f64, a: i64, b: i64, m: usize) -> PathField<D> {
        let c = self.coefficients();
        let v = self.lattice.generator(a, b);
        let dd = D * D;
        let combined: Vec<Vec<C64>> = (0..2 * dd)
            .map(|q| {
                let (fx, fy) = if q < dd { (0, 1) } else { (2, 3) };
                let e = q % dd;
                c[fx * dd + e].iter().zip(&c[fy * dd + e]).map(|(x, y)| x * v.re + y * v.im).collect()
            })
            .collect();
        let refs: Vec<&[C64]> = combined.iter().map(|v| v.as_slice()).collect();
        let samples = self.spectral.line_samples_many(&refs, s0, t0, a, b, m);
        let build = |offset: usize| -> Vec<CMatN<D>> {
            (0..=m).map(|k| CMatN::<D>::from_fn(|r, col| samples[offset + r * D + col][k % m])).collect()
        };
        PathField { p: build(0), m: build(dd) }
    }

    /// Largest `|Omega(mu) + Omega(1/conj mu)|`-type violation of the quaternionic symmetry.
    pub fn symmetry_residual(&self, mu: C64) -> f64 {
        let nu = C64::new(1.0, 0.0) / mu.conj();
        let (ax, ay) = self.eval(mu);
        let (bx, by) = self.eval(nu);
        (0..self.len())
            .map(|k| (bx[k] - conj_by_j(&ax[k])).norm().max((by[k] - conj_by_j(&ay[k])).norm()))
            .fold(0.0, f64::max)
    }

    /// Largest plaquette holonomy defect `|Hol - Id| / area` over `2 x 2` cell blocks, one RK4 step per edge.
    pub fn flatness_residual(&self, mu: C64) -> f64 {
        let (n1, n2) = (self.n1, self.n2);
        let e1 = self.lattice.tau1 * (2.0 / n1 as f64);
        let e2 = self.lattice.tau2 * (2.0 / n2 as f64);
        let area = 4.0 * self.lattice.area() / (n1 * n2) as f64;
        let (ox, oy) = self.eval(mu);
        let om = |k: usize, v: C64| ox[k] * C64::from(v.re) + oy[k] * C64::from(v.im);
        // one RK4 step of T' = -Omega T along displacement v through grid points k0, k1, k2
        let step = |k0: usize, k1: usize, k2: usize, v: C64| {
            let (a0, a1, a2) = (om(k0, v), om(k1, v), om(k2, v));
            let id = CMatN::<D>::identity();
            let k1m = -a0;
            let k2m = -(a1 * (id + k1m * C64::from(0.5)));
            let k3m = -(a1 * (id + k2m * C64::from(0.5)));
            let k4m = -(a2 * (id + k3m));
            id + (k1m + k2m * C64::from(2.0) + k3m * C64::from(2.0) + k4m) * C64::from(1.0 / 6.0)
        };
        (0..n1 / 2)
            .into_par_iter()
            .map(|bi| {
                let i = 2 * bi;
                let mut worst: f64 = 0.0;
                for j in (0..n2).step_by(2) {
                    let p = |di: usize, dj: usize| self.idx(i + di, j + dj);
                    let t1 = step(p(0, 0), p(1, 0), p(2, 0), e1);
                    let t2 = step(p(2, 0), p(2, 1), p(2, 2), e2);
                    let t3 = step(p(2, 2), p(1, 2), p(0, 2), -e1);
                    let t4 = step(p(0, 2), p(0, 1), p(0, 0), -e2);
                    let hol = t4 * t3 * t2 * t1;
                    worst = worst.max((hol - CMatN::<D>::identity()).norm() / area);
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `J X J^{-1}` for right multiplication by `j` on `D / 2` complexified quaternion slots.
pub fn conj_by_j<const D: usize>(x: &CMatN<D>) -> CMatN<D> {
    let mut jm = CMatN::<D>::zeros();
    for s in 0..D / 2 {
        jm[(2 * s, 2 * s + 1)] = C64::new(-1.0, 0.0);
        jm[(2 * s + 1, 2 * s)] = C64::new(1.0, 0.0);
    }
    jm * x.map(|c| c.conj()) * jm.transpose()
}

fn projectors(s: &CMat4) -> (CMat4, CMat4) {
    let id = CMat4::identity();
    ((id - s * I) * C64::from(0.5), (id + s * I) * C64::from(0.5))
}

/// `P = (1 - iS)/2 A_circ`, `M = (1 + iS)/2 A_circ`.
pub fn connection_form(cg: &CircleGrid, sg: &SphereCongruenceGrid) -> MuForm {
    let parts: Vec<[CMat4; 4]> = (0..cg.len())
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = projectors(&embed_qmat(&sg.s[k]));
            let (ax, ay) = (embed_qmat(&cg.ax[k]), embed_qmat(&cg.ay[k]));
            [lo * ax, lo * ay, hi * ax, hi * ay]
        })
        .collect();
    let col = |i: usize| parts.iter().map(|p| p[i]).collect::<Vec<_>>();
    MuForm::new(cg.n1, cg.n2, cg.lattice, col(0), col(1), col(2), col(3))
}

/// `P = Q_circ (1 - iS)/2`, `M = Q_circ (1 + iS)/2`.
pub fn dual_family(cg: &CircleGrid, sg: &SphereCongruenceGrid) -> MuForm {
    let parts: Vec<[CMat4; 4]> = (0..cg.len())
        .into_par_iter()
        .map(|k| {
            let (lo, hi) = projectors(&embed_qmat(&sg.s[k]));
            let (qx, qy) = (embed_qmat(&cg.qx[k]), embed_qmat(&cg.qy[k]));
            [qx * lo, qy * lo, qx * hi, qy * hi]
        })
        .collect();
    let col = |i: usize| parts.iter().map(|p| p[i]).collect::<Vec<_>>();
    MuForm::new(cg.n1, cg.n2, cg.lattice, col(0), col(1), col(2), col(3))
}

/// Constant family `P = c E`, `M = conj(c) E` with the nilpotent `E = E13 + E24`, i.e. the quaternionic
/// matrix `[[0, 1], [0, 0]]`. Every holonomy is `Id - a E`: two Jordan blocks at 1.
pub fn jordan_fixture(n1: usize, n2: usize, lattice: TorusLattice, c: C64) -> MuForm {
    let mut e = CMat4::zeros();
    e[(0, 2)] = C64::new(1.0, 0.0);
    e[(1, 3)] = C64::new(1.0, 0.0);
    let len = n1 * n2;
    MuForm::new(n1, n2, lattice, vec![e * c; len], vec![e * (c * I); len], vec![e * c.conj(); len], vec![e * (c * I).conj(); len])
}

/// `G(mu) = (mu + 1) Id - i (mu - 1) S` at one point; errors when numerically singular.
pub fn gauge_matrix(s: &crate::quat::QMat2, mu: C64) -> Result<CMat4> {
    let es = embed_qmat(s);
    let g = CMat4::identity() * (mu + 1.0) - es * (I * (mu - 1.0));
    let sv = g.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let cond = if smin == 0.0 { f64::INFINITY } else { smax / smin };
    if cond > 1e12 {
        return Err(Error::SingularGauge { cond });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moebius::{apply_eta, hopf_fields, mean_curvature_sphere, Ambient, EtaPolicy};
    use crate::quat::QMat2;
    use crate::surface::{builtin_surface, sample_frames, BuiltinKind};

    fn clifford_form(n: usize, rho: f64) -> (MuForm, CircleGrid, SphereCongruenceGrid) {
        let fg = sample_frames(&builtin_surface(&BuiltinKind::Clifford).unwrap(), n, n).unwrap();
        let sg = mean_curvature_sphere(&fg);
        let hg = hopf_fields(&fg, &sg);
        let cg = apply_eta(&hg, &EtaPolicy::CmcRho { rho, ambient: Ambient::S3 }, &fg, &sg).unwrap();
        (connection_form(&cg, &sg), cg, sg)
    }

    #[test]
    fn projector_parts_sum_and_typing() {
        let (mf, cg, sg) = clifford_form(16, 0.3);
        for k in 0..mf.len() {
            assert!((mf.px[k] + mf.mx[k] - embed_qmat(&cg.ax[k])).norm() < 1e-12);
            // (1,0) part: P_y = i P_x, (0,1) part: M_y = -i M_x
            assert!((mf.py[k] - mf.px[k] * I).norm() < 1e-12);
            assert!((mf.my[k] + mf.mx[k] * I).norm() < 1e-12);
            let (lo, hi) = projectors(&embed_qmat(&sg.s[k]));
            assert!((lo * hi).norm() < 1e-12);
        }
    }

    #[test]
    fn omega_vanishes_at_one() {
        let (mf, _, _) = clifford_form(16, 0.0);
        let (x, y) = mf.eval(C64::new(1.0, 0.0));
        assert!(x.iter().chain(&y).all(|m| m.norm() == 0.0));
        assert_eq!(mf.flatness_residual(C64::new(1.0, 0.0)), 0.0);
    }

    #[test]
    fn laurent_interpolation_recovers_coefficients() {
        let (mf, _, _) = clifford_form(16, 0.3);
        let (m1, m2) = (C64::new(2.0, 0.5), C64::new(-0.3, 1.1));
        let (o1, _) = mf.eval(m1);
        let (o2, _) = mf.eval(m2);
        // solve [[m1-1, 1/m1-1],[m2-1, 1/m2-1]] [P, M] = [O1, O2]
        let (a, b, c, d) = (m1 - 1.0, m1.inv() - 1.0, m2 - 1.0, m2.inv() - 1.0);
        let det = a * d - b * c;
        for k in 0..mf.len() {
            let p = (o1[k] * d - o2[k] * b) / det;
            let m = (o2[k] * a - o1[k] * c) / det;
            assert!((p - mf.px[k]).norm() < 1e-12 && (m - mf.mx[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn quaternionic_symmetry() {
        let (mf, _, _) = clifford_form(16, 0.3);
        for mu in [C64::new(2.0, 0.0), C64::new(0.5, 0.7), C64::from_polar(1.0, 1.3)] {
            assert!(mf.symmetry_residual(mu) < 1e-12);
        }
        let mut bad = mf.clone();
        for m in bad.mx.iter_mut() {
            m[(0, 1)] += C64::new(1e-3, 0.0);
        }
        assert!(bad.symmetry_residual(C64::new(2.0, 0.0)) > 1e-4);
    }

    #[test]
    fn rho_half_kills_constant_direction() {
        let (mf, _, _) = clifford_form(16, 0.5);
        let e0 = crate::quat::complexify(crate::quat::QVec2::new(crate::quat::Quaternion::ONE, crate::quat::Quaternion::ZERO));
        let e1 = crate::quat::apply_j(&e0);
        for k in 0..mf.len() {
            for m in [mf.px[k], mf.py[k], mf.mx[k], mf.my[k]] {
                assert!((m * e0).norm() < 1e-12 && (m * e1).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn flatness_converges() {
        let mu = C64::new(2.0, 0.0);
        let res: Vec<f64> = [16, 32, 64].iter().map(|&n| clifford_form(n, 0.0).0.flatness_residual(mu)).collect();
        for w in res.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.7, "{res:?}");
        }
        // uniform over an annulus
        let (mf, _, _) = clifford_form(32, 0.0);
        for mu in [C64::new(0.5, 0.0), C64::from_polar(2.0, 2.0), C64::from_polar(0.7, -1.0)] {
            // RK4 defect grows like the fifth power of the coefficient size
            let size = ((mu - 1.0).norm() + (mu.inv() - 1.0).norm()) / 1.5;
            assert!(mf.flatness_residual(mu) < 10.0 * res[1] * size.max(1.0).powi(5), "{mu}");
        }
    }

    #[test]
    fn flatness_fails_for_non_constrained_willmore_data() {
        // homogeneous torus with eta = 0 is not Willmore
        let mu = C64::new(2.0, 0.0);
        let res: Vec<f64> = [16, 32]
            .iter()
            .map(|&n| {
                let fg = sample_frames(&builtin_surface(&BuiltinKind::Homogeneous { r: 0.6 }).unwrap(), n, n).unwrap();
                let sg = mean_curvature_sphere(&fg);
                let cg = apply_eta(&hopf_fields(&fg, &sg), &EtaPolicy::Zero, &fg, &sg).unwrap();
                connection_form(&cg, &sg).flatness_residual(mu)
            })
            .collect();
        assert!(res[1] > 1e-2 && res[1] > 0.5 * res[0], "{res:?}");
    }

    #[test]
    fn dual_form_vanishes_at_one_and_for_zero_q() {
        let (_, cg, sg) = clifford_form(16, 0.0);
        let d = dual_family(&cg, &sg);
        let (x, _) = d.eval(C64::new(1.0, 0.0));
        assert!(x.iter().all(|m| m.norm() == 0.0));
        let mut z = cg.clone();
        for v in [&mut z.qx, &mut z.qy] {
            v.iter_mut().for_each(|q| *q = QMat2::ZERO);
        }
        let d = dual_family(&z, &sg);
        assert!(d.px.iter().chain(&d.mx).all(|m| m.norm() == 0.0));
    }

    #[test]
    fn gauge_matrix_basics() {
        let (_, _, sg) = clifford_form(16, 0.0);
        let g = gauge_matrix(&sg.s[3], C64::new(1.0, 0.0)).unwrap();
        assert!((g - CMat4::identity() * C64::from(2.0)).norm() < 1e-14);
        let mu = C64::new(0.4, 1.2);
        let g = gauge_matrix(&sg.s[5], mu).unwrap();
        let es = embed_qmat(&sg.s[5]);
        assert!((g * es - es * g).norm() < 1e-12);
        // S has eigenvalues +-i, so G is singular at mu = 0 on the (1 - iS) side: (mu+1) + (mu-1) = 0
        assert!(matches!(gauge_matrix(&sg.s[5], C64::new(0.0, 0.0)), Err(Error::SingularGauge { .. })));
    }

    #[test]
    fn path_field_matches_grid_values() {
        let (mf, _, _) = clifford_form(16, 0.3);
        let pf = mf.path_field(0.0, 0.25, 1, 0, 64);
        let v = mf.lattice.tau1;
        for k in (0..64).step_by(4) {
            let gi = mf.idx(k / 4, 4);
            let want = mf.px[gi] * C64::from(v.re) + mf.py[gi] * C64::from(v.im);
            assert!((pf.p[k] - want).norm() < 1e-11, "{k}");
        }
    }
}
