//! Diagnostic eigenvalues: Householder Hessenberg reduction followed by
//! single-shift complex QR. Used for reporting and certification only.

use num_complex::Complex64;

use super::{ComplexMatrix, ComplexVector, LinalgError};

/// Largest dimension accepted by [`eigenvalues_diagnostic`].
pub const EIG_DIAGNOSTIC_MAX_DIM: usize = 2048;

const BACKWARD_TOL: f64 = 1e-8;

/// All eigenvalues of `b`, unordered.
///
/// Each eigenvalue is checked by back-substituting an eigenvector of the Schur
/// factor, mapping it back, and requiring `‖Bw − λw‖ ≤ 1e-8·‖B‖_F·‖w‖`.
/// The QR phase is capped at `30·n` sweeps.
pub fn eigenvalues_diagnostic(b: &ComplexMatrix) -> Result<ComplexVector, LinalgError> {
    if !b.is_square() || b.rows() == 0 {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            b.rows(),
            b.cols()
        )));
    }
    let n = b.rows();
    if n > EIG_DIAGNOSTIC_MAX_DIM {
        return Err(LinalgError::DimensionMismatch(format!(
            "diagnostic eigensolver is capped at n = {EIG_DIAGNOSTIC_MAX_DIM}, got {n}"
        )));
    }
    if !b.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let norm = b.norm_fro();
    let mut h = b.clone();
    let mut q = ComplexMatrix::identity(n);
    hessenberg(&mut h, &mut q);
    schur(&mut h, &mut q)?;
    let lambdas = h.diagonal();

    if norm > 0.0 {
        for (k, &lambda) in lambdas.iter().enumerate() {
            let w = eigenvector(&h, &q, k);
            let bw = mul_sparse(b, &w);
            let res: f64 = bw
                .iter()
                .zip(&w)
                .map(|(x, y)| (x - lambda * y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let wn = super::norm2(&w);
            if !(res <= BACKWARD_TOL * norm * wn) {
                return Err(LinalgError::NoConvergence {
                    iterations: 0,
                    residual: res / wn,
                    gap_estimate: f64::NAN,
                });
            }
        }
    }
    Ok(lambdas)
}

/// `B w` skipping zero entries of `w`.
fn mul_sparse(b: &ComplexMatrix, w: &[Complex64]) -> ComplexVector {
    let n = b.rows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let nz: Vec<usize> = (0..w.len())
        .filter(|&j| w[j] != Complex64::new(0.0, 0.0))
        .collect();
    for (i, o) in out.iter_mut().enumerate() {
        let row = b.row(i);
        *o = nz.iter().map(|&j| row[j] * w[j]).sum();
    }
    out
}

fn hessenberg(h: &mut ComplexMatrix, q: &mut ComplexMatrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let tail: f64 = (k + 2..n).map(|i| h[(i, k)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let alpha = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        // v = x + phase·‖x‖·e₁, reflector I − 2vvᴴ/(vᴴv).
        let mut v: ComplexVector = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        // H ← P H (rows k+1..n), all columns from k.
        for j in k..n {
            let s: Complex64 = v
                .iter()
                .enumerate()
                .map(|(t, vt)| vt.conj() * h[(k + 1 + t, j)])
                .sum();
            let s = s * tau;
            for (t, vt) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vt * s;
            }
        }
        // H ← H P and Q ← Q P (columns k+1..n), all rows.
        for mat in [&mut *h, &mut *q] {
            for i in 0..n {
                let s: Complex64 = v
                    .iter()
                    .enumerate()
                    .map(|(t, vt)| mat[(i, k + 1 + t)] * vt)
                    .sum();
                let s = s * tau;
                for (t, vt) in v.iter().enumerate() {
                    mat[(i, k + 1 + t)] -= s * vt.conj();
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Reduces upper-Hessenberg `h` to upper-triangular Schur form in place,
/// accumulating the unitary transformations into `q`.
fn schur(h: &mut ComplexMatrix, q: &mut ComplexMatrix) -> Result<(), LinalgError> {
    let n = h.rows();
    let max_sweeps = 30 * n.max(1);
    let hnorm = h.norm_fro().max(f64::MIN_POSITIVE);
    let mut total = 0;
    let mut its = 0;
    let mut ihi = n as isize - 1;
    while ihi > 0 {
        let hi = ihi as usize;
        // Find the start of the active unreduced block.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let mut scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            if scale == 0.0 {
                scale = hnorm;
            }
            if sub <= f64::EPSILON * scale {
                h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            ihi -= 1;
            its = 0;
            continue;
        }
        if total >= max_sweeps {
            return Err(LinalgError::NoConvergence {
                iterations: total,
                residual: h[(hi, hi - 1)].norm(),
                gap_estimate: f64::NAN,
            });
        }

        let mu = if its > 0 && its % 10 == 0 {
            // Exceptional shift.
            h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
        } else {
            wilkinson_shift(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            )
        };
        qr_sweep(h, q, lo, hi, mu);
        its += 1;
        total += 1;
    }
    Ok(())
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let l1 = d - b * c / (half + disc);
    let l2 = d - b * c / (half - disc);
    let pick = |x: Complex64| {
        if x.re.is_finite() && x.im.is_finite() {
            Some(x)
        } else {
            None
        }
    };
    match (pick(l1), pick(l2)) {
        (Some(x), Some(y)) => {
            if (x - d).norm() <= (y - d).norm() {
                x
            } else {
                y
            }
        }
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => d,
    }
}

/// One explicitly shifted QR step on the active block `lo..=hi` via Givens
/// rotations, applied to the full matrix so that `h` stays a Schur form of
/// the original.
fn qr_sweep(h: &mut ComplexMatrix, q: &mut ComplexMatrix, lo: usize, hi: usize, mu: Complex64) {
    let n = h.rows();
    for k in lo..=hi {
        h[(k, k)] -= mu;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (a, b) = (h[(k, k)], h[(k + 1, k)]);
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (a / r, b / r)
        };
        // G = [[c̄, s̄], [−s, c]] maps (a, b) to (r, 0).
        for j in k..n {
            let (x, y) = (h[(k, j)], h[(k + 1, j)]);
            h[(k, j)] = c.conj() * x + s.conj() * y;
            h[(k + 1, j)] = -s * x + c * y;
        }
        rotations.push((c, s));
    }
    for (offset, &(c, s)) in rotations.iter().enumerate() {
        let k = lo + offset;
        // Right-multiply by Gᴴ = [[c, −s̄], [s, c̄]] on columns k, k+1.
        let last = (k + 1).min(hi);
        for i in 0..=last {
            let (x, y) = (h[(i, k)], h[(i, k + 1)]);
            h[(i, k)] = x * c + y * s;
            h[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
        for i in 0..n {
            let (x, y) = (q[(i, k)], q[(i, k + 1)]);
            q[(i, k)] = x * c + y * s;
            q[(i, k + 1)] = -x * s.conj() + y * c.conj();
        }
    }
    for k in lo..=hi {
        h[(k, k)] += mu;
    }
}

/// Eigenvector of the original matrix for the `k`-th Schur eigenvalue:
/// back-substitution on the triangular factor, then `w = Q w_T`.
fn eigenvector(t: &ComplexMatrix, q: &ComplexMatrix, k: usize) -> ComplexVector {
    let n = t.rows();
    let lambda = t[(k, k)];
    let smin = (f64::EPSILON * t.norm_fro()).max(f64::MIN_POSITIVE * 1e3);
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    w[k] = Complex64::new(1.0, 0.0);
    for i in (0..k).rev() {
        let s: Complex64 = (i + 1..=k).map(|j| t[(i, j)] * w[j]).sum();
        if s == Complex64::new(0.0, 0.0) {
            continue;
        }
        let mut d = t[(i, i)] - lambda;
        if d.norm() < smin {
            d = Complex64::new(smin, 0.0);
        }
        w[i] = -s / d;
        let big = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if big > 1e100 {
            w.iter_mut().for_each(|z| *z /= big);
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (j, wj) in w.iter().enumerate() {
        if *wj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += q[(i, j)] * wj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn contains(set: &[Complex64], z: Complex64, tol: f64) -> bool {
        set.iter().any(|w| (w - z).norm() <= tol)
    }

    #[test]
    fn triangular_gives_diagonal() {
        let b = ComplexMatrix::from_fn(4, 4, |i, j| {
            if j >= i {
                c(i as f64 + 1.0, j as f64 * 0.5)
            } else {
                c(0.0, 0.0)
            }
        });
        let ev = eigenvalues_diagnostic(&b).unwrap();
        for i in 0..4 {
            assert!(contains(&ev, b[(i, i)], 1e-12));
        }
    }

    #[test]
    fn near_jordan_block() {
        let b = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1e-6, 0.0]).unwrap();
        let ev = eigenvalues_diagnostic(&b).unwrap();
        assert!(contains(&ev, c(1e-3, 0.0), 1e-12));
        assert!(contains(&ev, c(-1e-3, 0.0), 1e-12));
    }

    #[test]
    fn rotation_has_imaginary_pair() {
        let b = ComplexMatrix::from_real(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0])
            .unwrap();
        let ev = eigenvalues_diagnostic(&b).unwrap();
        assert!(contains(&ev, c(0.0, 1.0), 1e-12));
        assert!(contains(&ev, c(0.0, -1.0), 1e-12));
        assert!(contains(&ev, c(2.0, 0.0), 1e-12));
    }

    #[test]
    fn dense_complex_trace_and_residuals() {
        let n = 12;
        let b = ComplexMatrix::from_fn(n, n, |i, j| {
            c(
                ((i * 5 + j * 11) % 7) as f64 - 3.0,
                ((i + 3 * j) % 4) as f64 * 0.25,
            )
        });
        let ev = eigenvalues_diagnostic(&b).unwrap();
        let trace: Complex64 = b.diagonal().iter().sum();
        let sum: Complex64 = ev.iter().sum();
        assert!((trace - sum).norm() < 1e-10 * b.norm_fro());
    }

    #[test]
    fn zero_and_cap() {
        let ev = eigenvalues_diagnostic(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(ev.iter().all(|z| z.norm() == 0.0));
        let big = ComplexMatrix::zeros(EIG_DIAGNOSTIC_MAX_DIM + 1, 1);
        assert!(eigenvalues_diagnostic(&big).is_err());
    }
}
