//! Smallest singular triplet by two-sided block inverse iteration.
//!
//! Each sweep alternates `Y = orth(B⁻ᴴ V)` and `B⁻¹ Y = V R`. Then
//! `B V = Y R⁻¹`, so the Ritz approximation of the smallest singular triplet
//! of `B` comes from the *largest* singular triplet of the small factor `R`,
//! which stays well defined even when `B` is exactly singular.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, factorize_regularized, norm2, ComplexMatrix, ComplexVector, LinalgError};

const BLOCK: usize = 3;
const MAX_ITERATIONS: usize = 500;
const STOP_TOL: f64 = 1e-13;
/// Residual contract, relative to `‖B‖_F`.
pub const TRIPLET_RESIDUAL_TOL: f64 = 1e-10;

/// `B v = σ u`, `Bᴴ u = σ v`, unit `u` and `v`.
///
/// Phase convention: the entry of `v` with the largest modulus (lowest index on
/// ties) is real and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: ComplexVector,
    pub v: ComplexVector,
}

impl SingularTriplet {
    /// `(‖Bv − σu‖₂, ‖Bᴴu − σv‖₂)`.
    pub fn residuals(&self, b: &ComplexMatrix) -> (f64, f64) {
        let bv = b.mul_vec(&self.v);
        let bhu = b.adjoint_mul_vec(&self.u);
        let r1 = bv
            .iter()
            .zip(&self.u)
            .map(|(x, y)| (x - y * self.sigma).norm_sqr())
            .sum::<f64>();
        let r2 = bhu
            .iter()
            .zip(&self.v)
            .map(|(x, y)| (x - y * self.sigma).norm_sqr())
            .sum::<f64>();
        (r1.sqrt(), r2.sqrt())
    }
}

/// Computes the smallest singular value of a square matrix with its unit
/// singular vectors.
///
/// Iterates at most 500 sweeps; `NoConvergence` carries the relative gap
/// between the two smallest Ritz values, which is small when `σ_min` is
/// (nearly) multiple.
pub fn smallest_singular_triplet(b: &ComplexMatrix) -> Result<SingularTriplet, LinalgError> {
    if !b.is_square() || b.rows() == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "singular triplet of a {}x{} matrix",
            b.rows(),
            b.cols()
        )));
    }
    let n = b.rows();
    let norm = b.norm_fro();
    if !norm.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if norm == 0.0 {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[0] = Complex64::new(1.0, 0.0);
        return Ok(SingularTriplet {
            sigma: 0.0,
            u: e.clone(),
            v: e,
        });
    }

    let lu = factorize_regularized(b)?;
    let p = BLOCK.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let start: Vec<ComplexVector> = (0..p)
        .map(|_| {
            (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        })
        .collect();
    let (mut basis_v, _) = orthonormalize(start);

    let mut best: Option<(f64, SingularTriplet)> = None;
    let mut since_improvement = 0;
    let mut gap = f64::NAN;
    let mut last_residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let left: Vec<ComplexVector> = basis_v
            .iter()
            .map(|col| lu.solve_adjoint(col))
            .collect::<Result<_, _>>()?;
        let (basis_y, _) = orthonormalize(left);
        let right: Vec<ComplexVector> = basis_y
            .iter()
            .map(|col| lu.solve(col))
            .collect::<Result<_, _>>()?;
        let (new_v, r) = orthonormalize(right);
        basis_v = new_v;

        let (s_max, s_second, left_vec, right_vec) = largest_singular_pair(&r);
        gap = if s_second > 0.0 {
            1.0 - s_second / s_max
        } else {
            1.0
        };
        let sigma = 1.0 / s_max;
        let v = combine(&basis_v, &left_vec);
        let u = combine(&basis_y, &right_vec);
        let mut triplet = SingularTriplet { sigma, u, v };
        fix_phase(&mut triplet);

        let (r1, r2) = triplet.residuals(b);
        let residual = r1.max(r2);
        last_residual = residual;
        if residual <= STOP_TOL * norm {
            return Ok(triplet);
        }
        match &best {
            Some((best_res, _)) if residual >= 0.5 * best_res => since_improvement += 1,
            _ => {
                best = Some((residual, triplet));
                since_improvement = 0;
            }
        }
        if since_improvement >= 5 {
            break;
        }
    }
    match best {
        Some((res, t)) if res <= TRIPLET_RESIDUAL_TOL * norm => Ok(t),
        _ => Err(LinalgError::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual: last_residual,
            gap_estimate: gap,
        }),
    }
}

fn combine(basis: &[ComplexVector], coeffs: &[Complex64]) -> ComplexVector {
    let n = basis[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (col, c) in basis.iter().zip(coeffs) {
        for (o, x) in out.iter_mut().zip(col) {
            *o += x * c;
        }
    }
    let nrm = norm2(&out);
    out.iter_mut().for_each(|z| *z /= nrm);
    out
}

fn fix_phase(t: &mut SingularTriplet) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, z) in t.v.iter().enumerate() {
        let a = z.norm();
        if a > best {
            best = a;
            idx = i;
        }
    }
    if best <= 0.0 {
        return;
    }
    let phase = t.v[idx].conj() / best;
    t.v.iter_mut().for_each(|z| *z *= phase);
    t.u.iter_mut().for_each(|z| *z *= phase);
    t.v[idx] = Complex64::new(t.v[idx].re.abs(), 0.0);
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Returns the
/// orthonormal columns and the upper-triangular `R` (row-major, p×p).
fn orthonormalize(mut cols: Vec<ComplexVector>) -> (Vec<ComplexVector>, Vec<Complex64>) {
    let p = cols.len();
    let n = cols[0].len();
    let mut r = vec![Complex64::new(0.0, 0.0); p * p];
    for j in 0..p {
        for _pass in 0..2 {
            for i in 0..j {
                let h = dot(&cols[i], &cols[j]);
                r[i * p + j] += h;
                let (done, rest) = cols.split_at_mut(j);
                for (x, q) in rest[0].iter_mut().zip(&done[i]) {
                    *x -= q * h;
                }
            }
        }
        let nrm = norm2(&cols[j]);
        if nrm > 1e-290 {
            r[j * p + j] = Complex64::new(nrm, 0.0);
            cols[j].iter_mut().for_each(|z| *z /= nrm);
        } else {
            // Rank-deficient block: substitute a unit vector orthogonal to the
            // previous columns; the matching R diagonal stays zero.
            let mut k = 0;
            loop {
                let mut e = vec![Complex64::new(0.0, 0.0); n];
                e[k % n] = Complex64::new(1.0, 0.0);
                for i in 0..j {
                    let h = dot(&cols[i], &e);
                    for (x, q) in e.iter_mut().zip(&cols[i]) {
                        *x -= q * h;
                    }
                }
                let en = norm2(&e);
                if en > 1e-3 || k > n {
                    e.iter_mut().for_each(|z| *z /= en);
                    cols[j] = e;
                    break;
                }
                k += 1;
            }
        }
    }
    (cols, r)
}

/// Largest singular value of the small upper-triangular `r` (p×p), the second
/// largest, and the matching left/right singular vectors.
fn largest_singular_pair(r: &[Complex64]) -> (f64, f64, ComplexVector, ComplexVector) {
    let p = (r.len() as f64).sqrt().round() as usize;
    // Rescale so that RᴴR does not overflow when B is (nearly) singular.
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rs: Vec<Complex64> = r.iter().map(|z| z / scale).collect();
    let mut h = vec![Complex64::new(0.0, 0.0); p * p];
    for i in 0..p {
        for j in 0..p {
            h[i * p + j] = (0..p).map(|k| rs[k * p + i].conj() * rs[k * p + j]).sum();
        }
    }
    let (vals, vecs) = hermitian_jacobi(p, &mut h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let top = order[0];
    let s_max_scaled = vals[top].max(0.0).sqrt();
    let s_second = if p > 1 {
        vals[order[1]].max(0.0).sqrt() * scale
    } else {
        0.0
    };
    let right: ComplexVector = (0..p).map(|i| vecs[i * p + top]).collect();
    let mut left: ComplexVector = (0..p)
        .map(|i| (0..p).map(|k| rs[i * p + k] * right[k]).sum::<Complex64>())
        .collect();
    left.iter_mut().for_each(|z| *z /= s_max_scaled);
    (s_max_scaled * scale, s_second, left, right)
}

/// Cyclic Jacobi for a small Hermitian matrix (row-major, overwritten).
/// Returns eigenvalues and eigenvectors (columns of the row-major matrix).
fn hermitian_jacobi(p: usize, h: &mut [Complex64]) -> (Vec<f64>, Vec<Complex64>) {
    let mut v = vec![Complex64::new(0.0, 0.0); p * p];
    for i in 0..p {
        v[i * p + i] = Complex64::new(1.0, 0.0);
    }
    for _sweep in 0..60 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| h[i * p + j].norm_sqr())
            .sum();
        let diag: f64 = (0..p).map(|i| h[i * p + i].norm_sqr()).sum();
        if off <= 1e-32 * diag || off == 0.0 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let g = h[i * p + j];
                let gm = g.norm();
                if gm == 0.0 {
                    continue;
                }
                let omega = g / gm;
                let a = h[i * p + i].re;
                let b = h[j * p + j].re;
                let theta = (b - a) / (2.0 * gm);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let qi = (Complex64::new(c, 0.0), -omega.conj() * s);
                let qj = (Complex64::new(s, 0.0), omega.conj() * c);
                // H ← H Q
                for k in 0..p {
                    let (hi, hj) = (h[k * p + i], h[k * p + j]);
                    h[k * p + i] = hi * qi.0 + hj * qi.1;
                    h[k * p + j] = hi * qj.0 + hj * qj.1;
                    let (vi, vj) = (v[k * p + i], v[k * p + j]);
                    v[k * p + i] = vi * qi.0 + vj * qi.1;
                    v[k * p + j] = vi * qj.0 + vj * qj.1;
                }
                // H ← Qᴴ H
                for k in 0..p {
                    let (hi, hj) = (h[i * p + k], h[j * p + k]);
                    h[i * p + k] = qi.0.conj() * hi + qi.1.conj() * hj;
                    h[j * p + k] = qj.0.conj() * hi + qj.1.conj() * hj;
                }
            }
        }
    }
    ((0..p).map(|i| h[i * p + i].re).collect(), v)
}
