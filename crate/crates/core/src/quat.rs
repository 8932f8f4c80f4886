//! Quaternions, the right quaternionic module H^2 and its complexification.
//!
//! A quaternion is split as `q = a + j b` with `a, b` complex (`C = span{1, i}`).
//! Under this splitting right multiplication by a complex scalar acts
//! componentwise, so `H^2` with right `i`-multiplication becomes `C^4` with
//! coordinates `(a1, b1, a2, b2)`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;
pub type CMat4 = Matrix4<C64>;
pub type CVec4 = Vector4<C64>;
pub type CMat2 = Matrix2<C64>;
pub type CVec2 = Vector2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const ONE: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);
    pub const I: Quaternion = Quaternion::new(0.0, 1.0, 0.0, 0.0);
    pub const J: Quaternion = Quaternion::new(0.0, 0.0, 1.0, 0.0);
    pub const K: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 1.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn real(w: f64) -> Self {
        Quaternion::new(w, 0.0, 0.0, 0.0)
    }

    pub fn from_complex(c: C64) -> Self {
        Quaternion::new(c.re, c.im, 0.0, 0.0)
    }

    /// Builds `a + j b`.
    pub fn from_split(a: C64, b: C64) -> Self {
        // j (b0 + b1 i) = b0 j - b1 k
        Quaternion::new(a.re, a.im, b.re, -b.im)
    }

    /// Returns `(a, b)` with `self = a + j b`.
    pub fn split(self) -> (C64, C64) {
        (C64::new(self.w, self.x), C64::new(self.y, -self.z))
    }

    pub fn conj(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn norm_sqr(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn inv(self) -> Self {
        let n = self.norm_sqr();
        self.conj().scale(1.0 / n)
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn re(self) -> f64 {
        self.w
    }

    pub fn im(self) -> Self {
        Quaternion::new(0.0, self.x, self.y, self.z)
    }

    /// Euclidean inner product `Re(conj(a) b)`.
    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn imag_vec(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_imag(v: [f64; 3]) -> Self {
        Quaternion::new(0.0, v[0], v[1], v[2])
    }

    /// `exp(i t)` as a quaternion.
    pub fn expi(t: f64) -> Self {
        Quaternion::new(t.cos(), t.sin(), 0.0, 0.0)
    }

    /// Right multiplication by a complex scalar.
    pub fn mul_c(self, c: C64) -> Self {
        self * Quaternion::from_complex(c)
    }

    /// The 2x2 complex matrix of left multiplication on `(a, b)`.
    pub fn left_matrix(self) -> CMat2 {
        let (a, b) = self.split();
        CMat2::new(a, -b.conj(), b, a.conj())
    }
}

/// Hamilton product.
pub fn qmul(a: Quaternion, b: Quaternion) -> Quaternion {
    Quaternion::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        qmul(self, rhs)
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: f64) -> Quaternion {
        self.scale(rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w + r.w, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, r: Quaternion) {
        *self = *self + r;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w - r.w, self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}

/// Column vector in the right module H^2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QVec2 {
    pub a: Quaternion,
    pub b: Quaternion,
}

impl QVec2 {
    pub fn new(a: Quaternion, b: Quaternion) -> Self {
        QVec2 { a, b }
    }

    /// Right scalar action `v q`.
    pub fn mul_right(self, q: Quaternion) -> Self {
        QVec2::new(self.a * q, self.b * q)
    }

    pub fn norm_sqr(self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr()
    }
}

/// 2x2 quaternionic matrix acting on [`QVec2`] from the left.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QMat2 {
    pub m: [[Quaternion; 2]; 2],
}

impl QMat2 {
    pub const ZERO: QMat2 = QMat2 { m: [[Quaternion::ZERO; 2]; 2] };

    pub fn new(a: Quaternion, b: Quaternion, c: Quaternion, d: Quaternion) -> Self {
        QMat2 { m: [[a, b], [c, d]] }
    }

    pub fn identity() -> Self {
        QMat2::new(Quaternion::ONE, Quaternion::ZERO, Quaternion::ZERO, Quaternion::ONE)
    }

    pub fn diag(a: Quaternion, d: Quaternion) -> Self {
        QMat2::new(a, Quaternion::ZERO, Quaternion::ZERO, d)
    }

    pub fn apply(&self, v: QVec2) -> QVec2 {
        QVec2::new(
            self.m[0][0] * v.a + self.m[0][1] * v.b,
            self.m[1][0] * v.a + self.m[1][1] * v.b,
        )
    }

    pub fn scale(&self, s: f64) -> QMat2 {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for e in row.iter_mut() {
                *e = e.scale(s);
            }
        }
        out
    }

    /// Conjugation by the unipotent chart matrix `[[1, f], [0, 1]]`.
    pub fn ad_chart(&self, f: Quaternion) -> QMat2 {
        let t = QMat2::new(Quaternion::ONE, f, Quaternion::ZERO, Quaternion::ONE);
        let tinv = QMat2::new(Quaternion::ONE, -f, Quaternion::ZERO, Quaternion::ONE);
        t * *self * tinv
    }

    /// Real part of the quaternionic trace.
    pub fn re_trace(&self) -> f64 {
        self.m[0][0].w + self.m[1][1].w
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.iter().flatten().map(|q| q.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl Mul for QMat2 {
    type Output = QMat2;
    fn mul(self, r: QMat2) -> QMat2 {
        let mut out = QMat2::ZERO;
        for i in 0..2 {
            for k in 0..2 {
                out.m[i][k] = self.m[i][0] * r.m[0][k] + self.m[i][1] * r.m[1][k];
            }
        }
        out
    }
}

impl Add for QMat2 {
    type Output = QMat2;
    fn add(self, r: QMat2) -> QMat2 {
        let mut out = self;
        for i in 0..2 {
            for k in 0..2 {
                out.m[i][k] += r.m[i][k];
            }
        }
        out
    }
}

impl Sub for QMat2 {
    type Output = QMat2;
    fn sub(self, r: QMat2) -> QMat2 {
        self + r.scale(-1.0)
    }
}

impl Neg for QMat2 {
    type Output = QMat2;
    fn neg(self) -> QMat2 {
        self.scale(-1.0)
    }
}

/// `(q1, q2) -> (a1, b1, a2, b2)` with `q = a + j b` in each slot.
pub fn complexify(v: QVec2) -> CVec4 {
    let (a1, b1) = v.a.split();
    let (a2, b2) = v.b.split();
    CVec4::new(a1, b1, a2, b2)
}

pub fn decomplexify(v: &CVec4) -> QVec2 {
    QVec2::new(Quaternion::from_split(v[0], v[1]), Quaternion::from_split(v[2], v[3]))
}

/// Complex 4x4 matrix of left multiplication by a quaternionic 2x2 matrix.
pub fn embed_qmat(m: &QMat2) -> CMat4 {
    let mut out = CMat4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            let blk = m.m[r][c].left_matrix();
            for i in 0..2 {
                for k in 0..2 {
                    out[(2 * r + i, 2 * c + k)] = blk[(i, k)];
                }
            }
        }
    }
    out
}

/// Right multiplication by `j`: `(a, b) -> (-conj b, conj a)` per slot. Antilinear.
pub fn apply_j(v: &CVec4) -> CVec4 {
    CVec4::new(-v[1].conj(), v[0].conj(), -v[3].conj(), v[2].conj())
}

/// Right multiplication by `j` on a single complexified quaternion.
pub fn apply_j2(v: &CVec2) -> CVec2 {
    CVec2::new(-v[1].conj(), v[0].conj())
}

/// `J X J^{-1}` for the antilinear `J` of right multiplication by `j`.
pub fn conj_by_j4(x: &CMat4) -> CMat4 {
    // J v = Jm conj(v) with Jm real block-diagonal, so J X J^{-1} = Jm conj(X) Jm^{-1}.
    let jm = j_real_matrix4();
    jm * x.map(|c| c.conj()) * jm.transpose()
}

pub fn conj_by_j2(x: &CMat2) -> CMat2 {
    let jm = CMat2::new(C64::new(0.0, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    jm * x.map(|c| c.conj()) * jm.transpose()
}

fn j_real_matrix4() -> CMat4 {
    let mut jm = CMat4::zeros();
    for s in 0..2 {
        jm[(2 * s, 2 * s + 1)] = C64::new(-1.0, 0.0);
        jm[(2 * s + 1, 2 * s)] = C64::new(1.0, 0.0);
    }
    jm
}
