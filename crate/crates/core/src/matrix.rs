//! Fixed-capacity symmetric matrices for the truncated-covariance algebra.
//!
//! Dimensions are capped at [`MAX_DIM`] so vectors and matrices live on the
//! stack and the per-step work of a replication never allocates. The
//! eigendecomposition is a cyclic Jacobi sweep with a fixed rotation order,
//! which makes every derived quantity (square root, inverse, norms)
//! deterministic for a given input.

use std::ops::{Index, IndexMut};

use thiserror::Error;

pub const MAX_DIM: usize = 8;

/// Eigenvalues at or above `-TOL_PSD` count as non-negative.
pub const TOL_PSD: f64 = 1e-10;

/// Asymmetry accepted (and averaged away) when building from raw entries.
pub const TOL_SYMMETRY: f64 = 1e-12;

/// Smallest eigenvalue for which [`inverse`] is attempted.
pub const MIN_INVERTIBLE: f64 = 1e-8;

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Mismatch(usize, usize),
    #[error("matrix not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix not positive semidefinite: smallest eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("matrix is near singular: smallest eigenvalue {0:e}")]
    NearSingular(f64),
}

/// A point of `R^d`, `d <= MAX_DIM`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector {
    dim: usize,
    data: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside 1..={MAX_DIM}");
        Vector { dim, data: [0.0; MAX_DIM] }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut v = Vector::zeros(values.len());
        v.data[..values.len()].copy_from_slice(values);
        v
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.dim]
    }

    pub fn norm_sq(&self) -> f64 {
        self.as_slice().iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        if self.dim == 1 {
            self.data[0].abs()
        } else {
            self.norm_sq().sqrt()
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.as_mut_slice().iter_mut().for_each(|x| *x *= factor);
        self
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

/// Real symmetric `d x d` matrix. Houses the truncated second-moment matrices,
/// their square roots and inverses, and differences of those.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} outside 1..={MAX_DIM}");
        SymMatrix { dim, a: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = s;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    /// Builds from row slices, averaging the two triangles so the stored
    /// matrix is exactly symmetric.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self, MatrixError> {
        let dim = rows.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(MatrixError::Dimension(dim));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(MatrixError::Mismatch(dim, row.len()));
            }
            m.a[i][..dim].copy_from_slice(row);
        }
        for i in 0..dim {
            for j in i + 1..dim {
                let gap = (m.a[i][j] - m.a[j][i]).abs();
                let scale = m.a[i][j].abs().max(m.a[j][i].abs()).max(1.0);
                if gap > TOL_SYMMETRY * scale {
                    return Err(MatrixError::NotSymmetric { i, j, gap });
                }
                let avg = 0.5 * (m.a[i][j] + m.a[j][i]);
                m.a[i][j] = avg;
                m.a[j][i] = avg;
            }
        }
        Ok(m)
    }

    /// `V diag(values) V^T` for orthonormal columns `V`.
    pub fn from_spectrum(values: &[f64], vectors: &[[f64; MAX_DIM]; MAX_DIM]) -> Self {
        let dim = values.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let mut s = 0.0;
                for (k, &lambda) in values.iter().enumerate() {
                    s += vectors[i][k] * lambda * vectors[j][k];
                }
                m.a[i][j] = s;
                m.a[j][i] = s;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.dim && j < self.dim);
        self.a[i][j]
    }

    pub fn is_identity(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| self.a[i][j] == if i == j { 1.0 } else { 0.0 }))
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for row in self.a.iter_mut().take(self.dim) {
            row.iter_mut().take(self.dim).for_each(|x| *x *= s);
        }
        self
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix, MatrixError> {
        self.zip(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix, MatrixError> {
        self.zip(other, |x, y| x - y)
    }

    fn zip(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SymMatrix, MatrixError> {
        if self.dim != other.dim {
            return Err(MatrixError::Mismatch(self.dim, other.dim));
        }
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] = f(self.a[i][j], other.a[i][j]);
            }
        }
        Ok(m)
    }

    /// `self += w x xᵀ`.
    pub fn add_outer(&mut self, x: &Vector, w: f64) {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                self.a[i][j] += w * x[i] * x[j];
            }
        }
    }

    /// `self * self`, symmetric for symmetric input.
    pub fn square(&self) -> SymMatrix {
        let d = self.dim;
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in i..d {
                let s: f64 = (0..d).map(|k| self.a[i][k] * self.a[k][j]).sum();
                m.a[i][j] = s;
                m.a[j][i] = s;
            }
        }
        m
    }

    /// General product, not symmetric in general.
    pub fn matmul(&self, other: &SymMatrix) -> Vec<Vec<f64>> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| (0..d).map(|k| self.a[i][k] * other.a[k][j]).sum()).collect()).collect()
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.dim, v.dim());
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let row = &self.a[i];
            let mut s = 0.0;
            for (k, x) in v.as_slice().iter().enumerate() {
                s += row[k] * x;
            }
            out.data[i] = s;
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        let d = self.dim;
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| self.a[i][j].powi(2)).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    fn off_diagonal_frobenius(&self) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += self.a[i][j] * self.a[i][j];
                }
            }
        }
        s.sqrt()
    }
}

/// Spectrum of a symmetric matrix: eigenvalues ascending, eigenvectors as
/// the matching columns of an orthonormal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    dim: usize,
    values: [f64; MAX_DIM],
    vectors: [[f64; MAX_DIM]; MAX_DIM],
}

impl EigenPair {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for i in 0..self.dim {
            v[i] = self.vectors[i][k];
        }
        v
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[self.dim - 1]
    }

    /// `V f(diag) V^T`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mapped: Vec<f64> = self.values().iter().map(|&x| f(x)).collect();
        SymMatrix::from_spectrum(&mapped, &self.vectors)
    }
}

/// Cyclic Jacobi eigendecomposition.
pub fn eigen(m: &SymMatrix) -> EigenPair {
    let d = m.dim;
    let mut a = *m;
    let mut v = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in v.iter_mut().enumerate().take(d) {
        row[i] = 1.0;
    }
    let scale = m.frobenius().max(1.0);
    for _ in 0..JACOBI_MAX_SWEEPS {
        if a.off_diagonal_frobenius() < JACOBI_TOL * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a.a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.a[q][q] - a.a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a.a[k][p];
                    let akq = a.a[k][q];
                    a.a[k][p] = c * akp - s * akq;
                    a.a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a.a[p][k];
                    let aqk = a.a[q][k];
                    a.a[p][k] = c * apk - s * aqk;
                    a.a[q][k] = s * apk + c * aqk;
                }
                a.a[p][q] = 0.0;
                a.a[q][p] = 0.0;
                for row in v.iter_mut().take(d) {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a.a[i][i].total_cmp(&a.a[j][j]).then(i.cmp(&j)));
    let mut values = [0.0; MAX_DIM];
    let mut vectors = [[0.0; MAX_DIM]; MAX_DIM];
    for (col, &src) in order.iter().enumerate() {
        values[col] = a.a[src][src];
        for i in 0..d {
            vectors[i][col] = v[i][src];
        }
    }
    EigenPair { dim: d, values, vectors }
}

/// The unique positive semidefinite square root. Eigenvalues in
/// `[-TOL_PSD, 0)` are clamped to zero.
pub fn psd_sqrt(m: &SymMatrix) -> Result<SymMatrix, MatrixError> {
    if m.is_identity() {
        return Ok(*m);
    }
    let e = eigen(m);
    if e.lambda_min() < -TOL_PSD {
        return Err(MatrixError::NotPsd(e.lambda_min()));
    }
    Ok(e.map(|x| x.max(0.0).sqrt()))
}

/// Operator norm `sup_{|x| <= 1} |m x|`, i.e. the largest `|λ|`.
pub fn op_norm(m: &SymMatrix) -> f64 {
    let e = eigen(m);
    e.lambda_min().abs().max(e.lambda_max().abs())
}

/// `a ⪯ b` in the Loewner order, up to [`TOL_PSD`].
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix) -> Result<bool, MatrixError> {
    if a.dim() != b.dim() {
        return Err(MatrixError::Mismatch(a.dim(), b.dim()));
    }
    let diff = b.sub(a)?;
    Ok(eigen(&diff).lambda_min() >= -TOL_PSD)
}

pub fn inverse(m: &SymMatrix) -> Result<SymMatrix, MatrixError> {
    if m.is_identity() {
        return Ok(*m);
    }
    let e = eigen(m);
    if e.lambda_min() <= MIN_INVERTIBLE {
        return Err(MatrixError::NearSingular(e.lambda_min()));
    }
    Ok(e.map(f64::recip))
}
