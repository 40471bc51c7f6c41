//! Dense complex square matrices and the Hermitian eigensolver.
//!
//! Storage is row-major. Dimensions here never exceed 256, so everything is
//! plain `Vec<Complex64>`; sector-structured work lives in [`crate::sectors`].

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &rhs.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let (m, n) = (self.dim, rhs.dim);
        let mut out = Self::zeros(m * n);
        for i in 0..m {
            for j in 0..m {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        out[(i * n + k, j * n + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.matmul(self).matmul(&u.adjoint())
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Self) -> f64 {
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest modulus of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest modulus of `A A† − I`.
    pub fn unitarity_defect(&self) -> f64 {
        self.matmul(&self.adjoint())
            .max_abs_diff(&Self::identity(self.dim))
    }

    /// Largest off-diagonal modulus.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn is_diagonal(&self) -> bool {
        self.max_off_diagonal() == 0.0
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = m[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Spectral decomposition of a Hermitian matrix. Eigenvectors are the
/// columns of `vectors`; eigenvalues are sorted in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    /// `⟨v_k| a |v_k⟩` for every eigenvector `v_k`.
    pub fn expectations(&self, a: &CMatrix) -> Vec<f64> {
        let n = self.vectors.dim();
        (0..n)
            .map(|k| {
                let mut acc = ZERO;
                for i in 0..n {
                    let vi = self.vectors[(i, k)].conj();
                    if vi == ZERO {
                        continue;
                    }
                    for j in 0..n {
                        acc += vi * a[(i, j)] * self.vectors[(j, k)];
                    }
                }
                acc.re
            })
            .collect()
    }

    /// Rebuilds `V f(Λ) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.dim();
        let mut out = CMatrix::zeros(n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix. Diagonal input is handled
/// exactly without iteration.
pub fn hermitian_eigen(m: &CMatrix) -> HermitianEigen {
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    let (values, vectors) = if m.is_diagonal() {
        let d = m.diagonal();
        (d, CMatrix::identity(n))
    } else {
        let eig = m.to_nalgebra().symmetric_eigen();
        (
            eig.eigenvalues.iter().copied().collect::<Vec<f64>>(),
            CMatrix::from_nalgebra(&eig.eigenvectors),
        )
    };
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut sorted_vectors = CMatrix::zeros(n);
    for (new_k, &old_k) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vectors[(i, new_k)] = vectors[(i, old_k)];
        }
    }
    HermitianEigen {
        values: order.iter().map(|&k| values[k]).collect(),
        vectors: sorted_vectors,
    }
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.is_diagonal() {
        let mut d = m.diagonal();
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let mut v: Vec<f64> = m
        .to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_diagonals_is_elementwise() {
        let a = CMatrix::from_diagonal(&[0.8, 0.2]);
        let b = CMatrix::from_diagonal(&[0.6, 0.4]);
        let k = a.kron(&b);
        let expected = [0.48, 0.32, 0.12, 0.08];
        for (i, e) in expected.iter().enumerate() {
            assert!((k[(i, i)].re - e).abs() < 1e-15);
        }
        assert_eq!(k.max_off_diagonal(), 0.0);
    }

    #[test]
    fn eigen_reconstructs_hermitian_matrix() {
        let mut m = CMatrix::zeros(3);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.3, 0.0);
        m[(2, 2)] = Complex64::new(0.2, 0.0);
        m[(0, 1)] = Complex64::new(0.1, 0.05);
        m[(1, 0)] = Complex64::new(0.1, -0.05);
        m[(1, 2)] = Complex64::new(0.0, 0.02);
        m[(2, 1)] = Complex64::new(0.0, -0.02);
        let eig = hermitian_eigen(&m);
        assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let back = eig.map_spectrum(|x| x);
        assert!(back.max_abs_diff(&m) < 1e-13);
        let sum: f64 = eig.values.iter().sum();
        assert!((sum - 1.0).abs() < 1e-13);
    }
}
