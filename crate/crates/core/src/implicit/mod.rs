//! Implicit determinant method for a nearby defective matrix.
//!
//! For `z = α + iβ` the Hermitian matrix
//!
//! ```text
//! K(α, β, ε) = [ −εI        A − zI ]
//!              [ (A − zI)ᴴ  −εI    ]
//! ```
//!
//! is bordered by a fixed vector `c` into `M = [K c; cᴴ 0]`. Solving
//! `M [x; f] = [0; 1]` defines a real scalar `f(α, β, ε)` that vanishes exactly
//! when `K` is singular, and `f_α = f_β = 0` at such a point exactly when the
//! halves `u`, `v` of `x` satisfy `uᴴv = 0`. Newton's method on
//! `g = (f, f_α, f_β)` then needs one factorization of `M` and nine solves per
//! step.

mod bordered;
mod newton;

use thiserror::Error;

use crate::linalg::{norm2, ComplexMatrix, ComplexVector, LinalgError};

pub use bordered::{build_k, build_m, evaluate_f_and_gradient, BorderedPoint, IMAG_LEAK_TOL};
pub use newton::{
    assemble_g, assemble_jacobian, initialize, newton_solve, ConvergenceRecord, InitStrategy,
    NewtonOutcome, NewtonSettings, StartPoint, StepCost,
};

#[derive(Debug, Error, Clone)]
pub enum NewtonError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid setting: {0}")]
    InvalidSettings(String),
    #[error(
        "bordered matrix is singular at (α, β, ε) = ({alpha:.6e}, {beta:.6e}, {epsilon:.6e}); choose a different border vector: {source}"
    )]
    SingularBorderedMatrix {
        alpha: f64,
        beta: f64,
        epsilon: f64,
        source: LinalgError,
    },
    #[error("bordered matrix is ill-conditioned (condition estimate {cond:.3e}); another singular value may be close to ε")]
    IllConditionedBorder {
        cond: f64,
        records: Vec<ConvergenceRecord>,
    },
    #[error("{quantity} has imaginary part {im:.3e} against real part {re:.3e}")]
    ImaginaryLeak {
        quantity: &'static str,
        re: f64,
        im: f64,
    },
    #[error("no convergence within {} Newton steps", records.len().saturating_sub(1))]
    MaxIterationsExceeded { records: Vec<ConvergenceRecord> },
    #[error("Newton Jacobian is singular (det {det:.3e}); F_αβ ≈ 0 suggests a Jordan block larger than 2")]
    SingularJacobian {
        det: f64,
        records: Vec<ConvergenceRecord>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl NewtonError {
    /// Iteration history carried by failure variants, when available.
    pub fn records(&self) -> Option<&[ConvergenceRecord]> {
        match self {
            Self::MaxIterationsExceeded { records }
            | Self::SingularJacobian { records, .. }
            | Self::IllConditionedBorder { records, .. } => Some(records),
            _ => None,
        }
    }
}

/// A square matrix `A` with `n ≥ 2`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    a: ComplexMatrix,
}

impl ProblemInstance {
    pub fn new(a: ComplexMatrix) -> Result<Self, NewtonError> {
        if !a.is_square() {
            return Err(NewtonError::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if a.rows() < 2 {
            return Err(NewtonError::DimensionMismatch(
                "A must be at least 2x2 for two eigenvalues to coalesce".into(),
            ));
        }
        if !a.is_finite() {
            return Err(NewtonError::Linalg(LinalgError::NonFinite));
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

/// Border vector `c ∈ ℂ²ⁿ`, nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct BorderVector(ComplexVector);

impl BorderVector {
    pub fn new(c: ComplexVector) -> Result<Self, NewtonError> {
        let nrm = norm2(&c);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(NewtonError::DimensionMismatch(
                "border vector must be nonzero and finite".into(),
            ));
        }
        Ok(Self(c))
    }

    pub fn as_slice(&self) -> &[num_complex::Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Values at a point once the Jacobian solves have run.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondOrder {
    pub f_epsilon: f64,
    pub f_alphaalpha: f64,
    pub f_alphabeta: f64,
    pub f_betabeta: f64,
    pub f_alphaepsilon: f64,
    pub f_betaepsilon: f64,
    pub x_epsilon: ComplexVector,
}

/// One evaluated Newton iterate. `x = [u; v]` is normalized by `cᴴx = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub x: ComplexVector,
    pub f: f64,
    pub f_alpha: f64,
    pub f_beta: f64,
    pub x_alpha: ComplexVector,
    pub x_beta: ComplexVector,
    pub second: Option<SecondOrder>,
    /// Condition estimate of the bordered matrix at this point.
    pub cond_estimate: f64,
    /// Largest `|Im| / (1 + |Re|)` seen among the extracted f-values.
    pub imag_leak: f64,
}

impl IterateState {
    pub fn n(&self) -> usize {
        self.x.len() / 2
    }

    pub fn u(&self) -> &[num_complex::Complex64] {
        &self.x[..self.n()]
    }

    pub fn v(&self) -> &[num_complex::Complex64] {
        &self.x[self.n()..]
    }

    pub fn z(&self) -> num_complex::Complex64 {
        num_complex::Complex64::new(self.alpha, self.beta)
    }

    pub fn g_norm(&self) -> f64 {
        let g = assemble_g(self);
        (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
    }

    /// `F_αβ = f_αα f_ββ − f_αβ²`, once second-order values exist.
    pub fn f_alphabeta_det(&self) -> Option<f64> {
        self.second
            .as_ref()
            .map(|s| s.f_alphaalpha * s.f_betabeta - s.f_alphabeta * s.f_alphabeta)
    }
}
