//! Dense complex linear algebra.
//!
//! Matrices are stored row-major: entry `(i, j)` of an `r × c` matrix lives at
//! index `i * c + j`. Vectors are plain `Vec<Complex64>`.

mod eig;
mod lu;
mod svd;

use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use thiserror::Error;

pub use eig::{eigenvalues_diagnostic, EIG_DIAGNOSTIC_MAX_DIM};
pub use lu::{factorize, Factorization};
pub use svd::{smallest_singular_triplet, SingularTriplet, TRIPLET_RESIDUAL_TOL};

pub(crate) use lu::factorize_regularized;

/// Dense complex vector.
pub type ComplexVector = Vec<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(
        "matrix is numerically singular: pivot {pivot:.3e} at step {step} below {threshold:.3e}"
    )]
    SingularMatrix {
        step: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error(
        "no convergence after {iterations} iterations (residual {residual:.3e}, relative gap estimate {gap_estimate:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        residual: f64,
        gap_estimate: f64,
    },
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn from_row_major(
        rows: usize,
        cols: usize,
        data: Vec<Complex64>,
    ) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "{} entries for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Real matrix from row-major `f64` data.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, LinalgError> {
        Self::from_row_major(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, z) in sums.iter_mut().zip(self.row(i)) {
                *s += z.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// `self - z I`.
    pub fn shifted(&self, z: Complex64) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] -= z;
        }
        m
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        assert_eq!(x.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `selfᴴ x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        assert_eq!(x.len(), self.rows, "adjoint_mul_vec dimension mismatch");
        let mut y = vec![Complex64::new(0.0, 0.0); self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += a.conj() * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn diagonal(&self) -> ComplexVector {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `xᴴ y`.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn scale(x: &mut [Complex64], s: Complex64) {
    x.iter_mut().for_each(|z| *z *= s);
}

/// Returns `x / ‖x‖₂`; the zero vector is returned unchanged.
pub fn normalized(x: &[Complex64]) -> ComplexVector {
    let n = norm2(x);
    if n == 0.0 {
        return x.to_vec();
    }
    x.iter().map(|z| z / n).collect()
}

pub fn sub_vec(x: &[Complex64], y: &[Complex64]) -> ComplexVector {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}
