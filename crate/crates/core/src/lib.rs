//! Distance from a complex square matrix to the nearest defective matrix.
//!
//! The nearest defective matrix is `B = A − ε* u vᴴ`, where `z*` is a double
//! eigenvalue of `B` and `(ε*, u, v)` is the smallest singular triplet of
//! `A − z*I`. The point `(z*, ε*)` is found by Newton's method on a bordered
//! Hermitian system ([`implicit`]), then independently checked ([`certify`]).
//!
//! ```
//! use neardefect::{gallery, implicit::*};
//! use num_complex::Complex64;
//!
//! let problem = ProblemInstance::new(gallery::kahan(6, 0.1).unwrap()).unwrap();
//! let start = initialize(&problem, Complex64::new(0.0, 0.0), &InitStrategy::Svd).unwrap();
//! let out = newton_solve(&problem, &NewtonSettings::default(), &start).unwrap();
//! assert!((out.epsilon_star() - 4.7049e-4).abs() < 1e-7);
//! ```

pub mod certify;
pub mod gallery;
pub mod implicit;
pub mod linalg;
