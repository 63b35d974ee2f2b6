//! Certification of a converged root and pseudospectrum sampling.
//!
//! Every quantity in a [`DefectiveCertificate`] is recomputed from `A` and the
//! final singular vectors; nothing is copied from the Newton iteration except
//! `(z*, ε*, x)` and `F_αβ`.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::implicit::IterateState;
use crate::linalg::{
    dot, eigenvalues_diagnostic, norm2, smallest_singular_triplet, ComplexMatrix, ComplexVector,
    LinalgError, EIG_DIAGNOSTIC_MAX_DIM,
};

#[derive(Debug, Error, Clone)]
pub enum CertifyError {
    #[error("certification failed: {quantity} = {value:.3e} exceeds {bound:.3e}")]
    CertificationFailed {
        quantity: &'static str,
        value: f64,
        bound: f64,
        certificate: Box<DefectiveCertificate>,
    },
    #[error("certification input invalid: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyTolerances {
    /// Bound on both eigen-residuals, relative to `‖A‖_F`.
    pub residual: f64,
    /// Bound on `|u*ᴴv*|`.
    pub orthogonality: f64,
    /// Bound on `|‖u‖ − ‖v‖| / max(‖u‖, ‖v‖)` for the unnormalized halves.
    pub norm_balance: f64,
}

impl Default for CertifyTolerances {
    fn default() -> Self {
        Self {
            residual: 1e-10,
            orthogonality: 1e-10,
            norm_balance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectiveCertificate {
    pub z_star: Complex64,
    pub epsilon_star: f64,
    pub u_star: ComplexVector,
    pub v_star: ComplexVector,
    /// `A − ε* u* v*ᴴ`.
    pub b: ComplexMatrix,
    /// `‖B v* − z* v*‖₂`.
    pub residual_right: f64,
    /// `‖u*ᴴ B − z* u*ᴴ‖₂`.
    pub residual_left: f64,
    /// `|u*ᴴ v*|`.
    pub orthogonality: f64,
    /// `|‖u‖ − ‖v‖| / max(‖u‖, ‖v‖)` before normalization.
    pub norm_balance: f64,
    pub f_alphabeta: Option<f64>,
    /// Eigenvalues of `A` closest to `z*`; absent above the diagnostic size cap.
    pub coalescing_pair: Option<[Complex64; 2]>,
    /// `‖ε* u* v*ᴴ‖_F` from the freshly formed rank-one update.
    pub perturbation_fro: f64,
    /// `‖ε* u* v*ᴴ‖₂` by power iteration on the formed update.
    pub perturbation_spectral: f64,
    /// `‖A − B‖_F` with `B` as stored; differs from `perturbation_fro` by the
    /// rounding committed when storing `B`.
    pub stored_distance: f64,
    /// `σ_min(B − z* I)`.
    pub sigma_min_shifted: f64,
    pub norm_a: f64,
}

impl DefectiveCertificate {
    /// Bound on `|stored_distance − ε*|` from rounding `B` entrywise.
    pub fn storage_rounding_bound(&self) -> f64 {
        4.0 * f64::EPSILON * self.b.norm_fro() + 4.0 * f64::EPSILON * self.perturbation_fro
    }
}

/// Builds the certificate for a converged iterate and checks it against `tol`.
///
/// A negative `ε` is folded into `u`, since `(A − zI)v = εu` is unchanged by
/// `(ε, u) → (−ε, −u)`.
pub fn certify(
    a: &ComplexMatrix,
    state: &IterateState,
    tol: &CertifyTolerances,
) -> Result<DefectiveCertificate, CertifyError> {
    let n = a.rows();
    if !a.is_square() || state.x.len() != 2 * n {
        return Err(CertifyError::InvalidInput(format!(
            "iterate of length {} for a {}x{} matrix",
            state.x.len(),
            a.rows(),
            a.cols()
        )));
    }
    let z = state.z();
    let (nu, nv) = (norm2(state.u()), norm2(state.v()));
    if !(nu > 0.0 && nv > 0.0) {
        return Err(CertifyError::InvalidInput(
            "singular vector half is zero".into(),
        ));
    }
    let sign = if state.epsilon < 0.0 { -1.0 } else { 1.0 };
    let eps = state.epsilon.abs();
    let u: ComplexVector = state.u().iter().map(|x| x * (sign / nu)).collect();
    let v: ComplexVector = state.v().iter().map(|x| x / nv).collect();
    let norm_balance = (nu - nv).abs() / nu.max(nv);

    let e = ComplexMatrix::from_fn(n, n, |i, j| u[i] * v[j].conj() * eps);
    let b = a.sub(&e);
    let perturbation_fro = e.norm_fro();
    let perturbation_spectral = spectral_norm(&e);
    let stored_distance = a.sub(&b).norm_fro();

    let bv = b.mul_vec(&v);
    let residual_right = norm2(
        &bv.iter()
            .zip(&v)
            .map(|(p, q)| p - q * z)
            .collect::<Vec<_>>(),
    );
    let bhu = b.adjoint_mul_vec(&u);
    let residual_left = norm2(
        &bhu.iter()
            .zip(&u)
            .map(|(p, q)| p - q * z.conj())
            .collect::<Vec<_>>(),
    );
    let orthogonality = dot(&u, &v).norm();
    let sigma_min_shifted = smallest_singular_triplet(&b.shifted(z))?.sigma;

    let coalescing_pair = if n <= EIG_DIAGNOSTIC_MAX_DIM {
        let mut eig = eigenvalues_diagnostic(a)?;
        eig.sort_by(|p, q| (p - z).norm().total_cmp(&(q - z).norm()));
        Some([eig[0], eig[1]])
    } else {
        None
    };

    let norm_a = a.norm_fro();
    let cert = DefectiveCertificate {
        z_star: z,
        epsilon_star: eps,
        u_star: u,
        v_star: v,
        b,
        residual_right,
        residual_left,
        orthogonality,
        norm_balance,
        f_alphabeta: state.f_alphabeta_det(),
        coalescing_pair,
        perturbation_fro,
        perturbation_spectral,
        stored_distance,
        sigma_min_shifted,
        norm_a,
    };

    let scale = norm_a.max(f64::MIN_POSITIVE);
    let mut checks = vec![
        ("residual_right", residual_right, tol.residual * scale),
        ("residual_left", residual_left, tol.residual * scale),
        ("orthogonality", orthogonality, tol.orthogonality),
    ];
    if eps > 0.0 {
        checks.push(("norm_balance", norm_balance, tol.norm_balance));
    }
    for (quantity, value, bound) in checks {
        if !(value <= bound) {
            return Err(CertifyError::CertificationFailed {
                quantity,
                value,
                bound,
                certificate: Box::new(cert),
            });
        }
    }
    Ok(cert)
}

fn spectral_norm(e: &ComplexMatrix) -> f64 {
    let n = e.cols();
    if n == 0 {
        return 0.0;
    }
    let mut x: ComplexVector = (0..n)
        .map(|i| Complex64::new(1.0, 0.1 * i as f64))
        .collect();
    let mut sigma = 0.0;
    for _ in 0..20 {
        let nx = norm2(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|t| *t /= nx);
        let y = e.mul_vec(&x);
        sigma = norm2(&y);
        x = e.adjoint_mul_vec(&y);
    }
    sigma
}

/// `σ_min(A − zI)` sampled on a rectangle; `values[k][j]` is taken at
/// `z = re[j] + i·im[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudospectrumGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (count - 1) as f64
            }
        })
        .collect()
}

/// Evaluates `σ_min(A − zI)` on a `counts.0 × counts.1` grid over
/// `re_range × im_range`. Rows are evaluated in parallel; the result does not
/// depend on scheduling.
pub fn sigma_min_grid(
    a: &ComplexMatrix,
    re_range: (f64, f64),
    im_range: (f64, f64),
    counts: (usize, usize),
) -> Result<PseudospectrumGrid, LinalgError> {
    if counts.0 < 2 || counts.1 < 2 {
        return Err(LinalgError::DimensionMismatch(format!(
            "grid needs at least 2 samples per axis, got {}x{}",
            counts.0, counts.1
        )));
    }
    if ![re_range.0, re_range.1, im_range.0, im_range.1]
        .iter()
        .all(|t| t.is_finite())
    {
        return Err(LinalgError::NonFinite);
    }
    let re = linspace(re_range.0, re_range.1, counts.0);
    let im = linspace(im_range.0, im_range.1, counts.1);
    let values = im
        .par_iter()
        .map(|&y| {
            re.iter()
                .map(|&x| {
                    smallest_singular_triplet(&a.shifted(Complex64::new(x, y))).map(|t| t.sigma)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PseudospectrumGrid { re, im, values })
}

impl PseudospectrumGrid {
    pub fn min(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `re,im,sigma_min` rows, imaginary part outer, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "re,im,sigma_min")?;
        for (y, row) in self.im.iter().zip(&self.values) {
            for (x, s) in self.re.iter().zip(row) {
                writeln!(w, "{x:.16e},{y:.16e},{s:.16e}")?;
            }
        }
        Ok(())
    }
}

/// `σ_min(A − zI)` at `z*` and its eight compass neighbours.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleReport {
    pub center: f64,
    /// E, NE, N, NW, W, SW, S, SE.
    pub neighbours: [f64; 8],
    /// Some opposite pair lies above the center and another below it.
    pub saddle_signature: bool,
    /// `|min over neighbours − ε*|`.
    pub circle_min_gap: f64,
    /// `ε* ≤ 0`: the root sits on an eigenvalue of `A`.
    pub degenerate: bool,
}

pub fn saddle_check(
    a: &ComplexMatrix,
    z_star: Complex64,
    epsilon_star: f64,
    step: f64,
) -> Result<SaddleReport, LinalgError> {
    if !(step > 0.0) {
        return Err(LinalgError::DimensionMismatch(format!(
            "step must be positive, got {step}"
        )));
    }
    let sigma = |z: Complex64| smallest_singular_triplet(&a.shifted(z)).map(|t| t.sigma);
    let center = sigma(z_star)?;
    let mut neighbours = [0.0; 8];
    for (k, slot) in neighbours.iter_mut().enumerate() {
        let angle = std::f64::consts::FRAC_PI_4 * k as f64;
        *slot = sigma(z_star + Complex64::from_polar(step, angle))?;
    }
    let pairs = (0..4).map(|k| (neighbours[k], neighbours[k + 4]));
    let (mut above, mut below) = (false, false);
    for (p, q) in pairs {
        above |= p > center && q > center;
        below |= p < center && q < center;
    }
    let circle_min = neighbours.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SaddleReport {
        center,
        neighbours,
        saddle_signature: above && below,
        circle_min_gap: (circle_min - epsilon_star).abs(),
        degenerate: !(epsilon_star > 0.0),
    })
}
