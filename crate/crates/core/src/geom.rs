//! Small fixed-capacity vectors and matrices for spatial dimensions 2 and 3.
//!
//! The runtime dimension is carried alongside a `[f64; 3]` buffer so the hot
//! loops in field evaluation stay allocation-free.

use serde::{Deserialize, Serialize};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A d-vector, d in {2, 3}; components beyond `dim` are kept at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialVec {
    dim: usize,
    c: [f64; MAX_DIM],
}

impl SpatialVec {
    pub fn zeros(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim), "dim must be 2 or 3");
        Self { dim, c: [0.0; MAX_DIM] }
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut out = Self::zeros(v.len());
        out.c[..v.len()].copy_from_slice(v);
        out
    }

    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut out = Self::zeros(dim);
        out.c[axis] = 1.0;
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        debug_assert!(i < self.dim);
        self.c[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        debug_assert!(i < self.dim);
        self.c[i] = v;
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.c[i] * other.c[i];
        }
        s
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] *= s;
        }
        out
    }

    #[inline]
    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] += other.c[i];
        }
        out
    }

    #[inline]
    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.c[i] -= other.c[i];
        }
        out
    }

    /// self += s * other, in place.
    #[inline]
    pub fn axpy(&mut self, s: f64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for i in 0..self.dim {
            self.c[i] += s * other.c[i];
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize a zero vector");
        self.scaled(1.0 / n)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }
}

/// A symmetric-capable d x d matrix, same storage convention as [`SpatialVec`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialMat {
    dim: usize,
    m: [[f64; MAX_DIM]; MAX_DIM],
}

impl SpatialMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((2..=MAX_DIM).contains(&dim), "dim must be 2 or 3");
        Self { dim, m: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = 1.0;
        }
        out
    }

    /// Diagonal matrix in the given dimension.
    pub fn diagonal(dim: usize, d: &[f64]) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out.m[i][i] = d[i];
        }
        out
    }

    /// The incompressibility projector I - k (x) k / |k|^2.
    pub fn projector(k: &SpatialVec) -> Self {
        let n2 = k.norm_sq();
        assert!(n2 > 0.0, "projector undefined at k = 0");
        let mut out = Self::identity(k.dim());
        for i in 0..k.dim() {
            for j in 0..k.dim() {
                out.m[i][j] -= k.get(i) * k.get(j) / n2;
            }
        }
        out
    }

    pub fn outer(a: &SpatialVec, b: &SpatialVec) -> Self {
        debug_assert_eq!(a.dim(), b.dim());
        let mut out = Self::zeros(a.dim());
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                out.m[i][j] = a.get(i) * b.get(j);
            }
        }
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.dim && j < self.dim);
        self.m[i][j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    pub fn mul_vec(&self, v: &SpatialVec) -> SpatialVec {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = SpatialVec::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.m[i][j] * v.get(j);
            }
            out.set(i, s);
        }
        out
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut s = 0.0;
                for k in 0..self.dim {
                    s += self.m[i][k] * other.m[k][j];
                }
                out.m[i][j] = s;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = self.m[j][i];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] -= other.m[i][j];
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] *= s;
            }
        }
        out
    }

    /// Elementwise absolute value; used to map component error estimates
    /// through frame rotations.
    pub fn abs(&self) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.m[i][j] = out.m[i][j].abs();
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m = m.max(self.m[i][j].abs());
            }
        }
        m
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if (self.m[i][j] - self.m[j][i]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Positive semidefiniteness check via leading principal minors with a
    /// small tolerance relative to the matrix scale.
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1e-300);
        let t = tol * scale;
        match self.dim {
            2 => {
                let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
                self.m[0][0] >= -t && det >= -t * scale
            }
            3 => {
                let m = &self.m;
                let det2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                let det3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
                m[0][0] >= -t && det2 >= -t * scale && det3 >= -t * scale * scale
            }
            _ => unreachable!(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.m[i][..self.dim].to_vec())
            .collect()
    }
}

/// Orthonormal basis of the plane orthogonal to `k` (one vector for d=2, two
/// for d=3). Exact up to rounding; used to draw projected Gaussian amplitudes
/// without forming the projector.
pub fn transverse_basis(k: &SpatialVec) -> [SpatialVec; 2] {
    let khat = k.normalized();
    match k.dim() {
        2 => {
            let mut e = SpatialVec::zeros(2);
            e.set(0, -khat.get(1));
            e.set(1, khat.get(0));
            [e, SpatialVec::zeros(2)]
        }
        3 => {
            // start from the coordinate axis least aligned with k
            let mut least = 0;
            for i in 1..3 {
                if khat.get(i).abs() < khat.get(least).abs() {
                    least = i;
                }
            }
            let mut e1 = SpatialVec::basis(3, least);
            let proj = e1.dot(&khat);
            e1.axpy(-proj, &khat);
            let e1 = e1.normalized();
            // e2 = khat x e1
            let mut e2 = SpatialVec::zeros(3);
            e2.set(0, khat.get(1) * e1.get(2) - khat.get(2) * e1.get(1));
            e2.set(1, khat.get(2) * e1.get(0) - khat.get(0) * e1.get(2));
            e2.set(2, khat.get(0) * e1.get(1) - khat.get(1) * e1.get(0));
            [e1, e2]
        }
        _ => unreachable!(),
    }
}

/// Rotation taking the first coordinate axis onto `direction` (columns form an
/// orthonormal frame whose first column is `direction`, normalized).
pub fn rotation_from_e1(direction: &SpatialVec) -> SpatialMat {
    let d = direction.normalized();
    let basis = transverse_basis(&d);
    let mut q = SpatialMat::zeros(direction.dim());
    for i in 0..direction.dim() {
        q.set(i, 0, d.get(i));
        q.set(i, 1, basis[0].get(i));
        if direction.dim() == 3 {
            q.set(i, 2, basis[1].get(i));
        }
    }
    q
}
