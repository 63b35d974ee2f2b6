use num_complex::Complex64;

use super::{BorderVector, IterateState, NewtonError, ProblemInstance, SecondOrder};
use crate::linalg::{factorize, ComplexMatrix, ComplexVector, Factorization, LinalgError};

/// Bound on `|Im f| / (1 + |Re f|)` for every extracted f-value.
pub const IMAG_LEAK_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `K = [[−εI, A − zI], [(A − zI)ᴴ, −εI]]`, Hermitian by construction.
pub fn build_k(a: &ComplexMatrix, alpha: f64, beta: f64, epsilon: f64) -> ComplexMatrix {
    assert!(a.is_square(), "build_k needs a square matrix");
    let n = a.rows();
    let z = Complex64::new(alpha, beta);
    let mut k = ComplexMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        k[(i, i)] = Complex64::new(-epsilon, 0.0);
        k[(n + i, n + i)] = Complex64::new(-epsilon, 0.0);
        for j in 0..n {
            let mut e = a[(i, j)];
            if i == j {
                e -= z;
            }
            k[(i, n + j)] = e;
            k[(n + j, i)] = e.conj();
        }
    }
    k
}

/// `M = [[K, c], [cᴴ, 0]]`.
pub fn build_m(k: &ComplexMatrix, c: &BorderVector) -> Result<ComplexMatrix, NewtonError> {
    let m = k.rows();
    if !k.is_square() || c.len() != m {
        return Err(NewtonError::DimensionMismatch(format!(
            "border of length {} for a {}x{} matrix",
            c.len(),
            k.rows(),
            k.cols()
        )));
    }
    let cs = c.as_slice();
    Ok(ComplexMatrix::from_fn(m + 1, m + 1, |i, j| {
        match (i < m, j < m) {
            (true, true) => k[(i, j)],
            (true, false) => cs[i],
            (false, true) => cs[j].conj(),
            (false, false) => ZERO,
        }
    }))
}

/// A point where `M` has been factorized, together with the values derived
/// from it. The Jacobian solves reuse the same factorization.
#[derive(Debug)]
pub struct BorderedPoint {
    state: IterateState,
    factorization: Factorization,
}

/// Factorizes `M(α, β, ε)` once and performs the three solves that give
/// `f`, `f_α`, `f_β` together with `x`, `x_α`, `x_β`.
pub fn evaluate_f_and_gradient(
    problem: &ProblemInstance,
    border: &BorderVector,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<BorderedPoint, NewtonError> {
    let n = problem.n();
    if border.len() != 2 * n {
        return Err(NewtonError::DimensionMismatch(format!(
            "border of length {} for n = {}",
            border.len(),
            n
        )));
    }
    if !(alpha.is_finite() && beta.is_finite() && epsilon.is_finite()) {
        return Err(NewtonError::Linalg(LinalgError::NonFinite));
    }
    let m = build_m(&build_k(problem.matrix(), alpha, beta, epsilon), border)?;
    let factorization = factorize(&m).map_err(|source| match source {
        LinalgError::SingularMatrix { .. } => NewtonError::SingularBorderedMatrix {
            alpha,
            beta,
            epsilon,
            source,
        },
        other => NewtonError::Linalg(other),
    })?;

    let mut leak = 0.0;
    let mut e_last = vec![ZERO; 2 * n + 1];
    e_last[2 * n] = Complex64::new(1.0, 0.0);
    let sol = factorization.solve(&e_last)?;
    let f = real_part("f", sol[2 * n], &mut leak)?;
    let x = sol[..2 * n].to_vec();
    let (u, v) = x.split_at(n);

    let rhs_alpha = stack(v, u, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let sol = factorization.solve(&rhs_alpha)?;
    let f_alpha = real_part("f_alpha", sol[2 * n], &mut leak)?;
    let x_alpha = sol[..2 * n].to_vec();

    let rhs_beta = stack(v, u, I, -I);
    let sol = factorization.solve(&rhs_beta)?;
    let f_beta = real_part("f_beta", sol[2 * n], &mut leak)?;
    let x_beta = sol[..2 * n].to_vec();

    let cond_estimate = factorization.cond_estimate();
    Ok(BorderedPoint {
        state: IterateState {
            alpha,
            beta,
            epsilon,
            x,
            f,
            f_alpha,
            f_beta,
            x_alpha,
            x_beta,
            second: None,
            cond_estimate,
            imag_leak: leak,
        },
        factorization,
    })
}

impl BorderedPoint {
    pub fn state(&self) -> &IterateState {
        &self.state
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn into_state(self) -> IterateState {
        self.state
    }

    /// Six further solves against the same factorization for `f_ε` and the
    /// five distinct second derivatives. Idempotent.
    pub fn evaluate_jacobian(&mut self) -> Result<(), NewtonError> {
        if self.state.second.is_some() {
            return Ok(());
        }
        let s = &self.state;
        let n = s.n();
        let fac = &self.factorization;
        let mut leak = s.imag_leak;
        let one = Complex64::new(1.0, 0.0);
        let (u_a, v_a) = s.x_alpha.split_at(n);
        let (u_b, v_b) = s.x_beta.split_at(n);

        let mut rhs = s.x.clone();
        rhs.push(ZERO);
        let sol = fac.solve(&rhs)?;
        let f_epsilon = real_part("f_epsilon", sol[2 * n], &mut leak)?;
        let x_epsilon = sol[..2 * n].to_vec();
        let (u_e, v_e) = x_epsilon.split_at(n);

        // [v_ε + u_α; u_ε + v_α; 0]
        let rhs = sum_stack(v_e, one, u_a, one, u_e, one, v_a, one);
        let f_alphaepsilon = real_part("f_alphaepsilon", fac.solve(&rhs)?[2 * n], &mut leak)?;

        // [i v_ε + u_β; −i u_ε + v_β; 0]
        let rhs = sum_stack(v_e, I, u_b, one, u_e, -I, v_b, one);
        let f_betaepsilon = real_part("f_betaepsilon", fac.solve(&rhs)?[2 * n], &mut leak)?;

        // 2 [v_α; u_α; 0]
        let rhs = stack(v_a, u_a, Complex64::new(2.0, 0.0), Complex64::new(2.0, 0.0));
        let f_alphaalpha = real_part("f_alphaalpha", fac.solve(&rhs)?[2 * n], &mut leak)?;

        // [i v_α + v_β; −i u_α + u_β; 0]
        let rhs = sum_stack(v_a, I, v_b, one, u_a, -I, u_b, one);
        let f_alphabeta = real_part("f_alphabeta", fac.solve(&rhs)?[2 * n], &mut leak)?;

        // 2i [v_β; −u_β; 0]
        let rhs = stack(v_b, u_b, 2.0 * I, -2.0 * I);
        let f_betabeta = real_part("f_betabeta", fac.solve(&rhs)?[2 * n], &mut leak)?;

        self.state.imag_leak = leak;
        self.state.second = Some(SecondOrder {
            f_epsilon,
            f_alphaalpha,
            f_alphabeta,
            f_betabeta,
            f_alphaepsilon,
            f_betaepsilon,
            x_epsilon,
        });
        Ok(())
    }
}

fn real_part(quantity: &'static str, value: Complex64, leak: &mut f64) -> Result<f64, NewtonError> {
    let ratio = value.im.abs() / (1.0 + value.re.abs());
    if !(ratio <= IMAG_LEAK_TOL) {
        return Err(NewtonError::ImaginaryLeak {
            quantity,
            re: value.re,
            im: value.im,
        });
    }
    *leak = f64::max(*leak, ratio);
    Ok(value.re)
}

/// `[s·top; t·bottom; 0]`.
fn stack(top: &[Complex64], bottom: &[Complex64], s: Complex64, t: Complex64) -> ComplexVector {
    let mut out = Vec::with_capacity(top.len() + bottom.len() + 1);
    out.extend(top.iter().map(|z| z * s));
    out.extend(bottom.iter().map(|z| z * t));
    out.push(ZERO);
    out
}

/// `[a·p + b·q; c·r + d·w; 0]`.
#[allow(clippy::too_many_arguments)]
fn sum_stack(
    p: &[Complex64],
    a: Complex64,
    q: &[Complex64],
    b: Complex64,
    r: &[Complex64],
    c: Complex64,
    w: &[Complex64],
    d: Complex64,
) -> ComplexVector {
    let mut out = Vec::with_capacity(2 * p.len() + 1);
    out.extend(p.iter().zip(q).map(|(x, y)| x * a + y * b));
    out.extend(r.iter().zip(w).map(|(x, y)| x * c + y * d));
    out.push(ZERO);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn k_for_scalar_matrix() {
        let a = ComplexMatrix::from_real(1, 1, &[1.0]).unwrap();
        let k = build_k(&a, 0.5, 0.0, 0.1);
        assert_eq!(
            k,
            ComplexMatrix::from_real(2, 2, &[-0.1, 0.5, 0.5, -0.1]).unwrap()
        );
    }

    #[test]
    fn k_singular_when_epsilon_is_a_singular_value() {
        let a = ComplexMatrix::from_real(1, 1, &[2.0]).unwrap();
        let k = build_k(&a, 0.0, 0.0, 2.0);
        assert_eq!(
            k,
            ComplexMatrix::from_real(2, 2, &[-2.0, 2.0, 2.0, -2.0]).unwrap()
        );
        let det = k[(0, 0)] * k[(1, 1)] - k[(0, 1)] * k[(1, 0)];
        assert_eq!(det, c(0.0, 0.0));
    }

    #[test]
    fn k_and_m_are_exactly_hermitian() {
        let a = ComplexMatrix::from_fn(3, 3, |i, j| {
            c(i as f64 - 0.3 * j as f64, 0.7 * i as f64 * j as f64 - 1.0)
        });
        let k = build_k(&a, 0.37, -1.1, 0.05);
        assert_eq!(k, k.adjoint());
        let border = BorderVector::new((0..6).map(|i| c(1.0, i as f64)).collect()).unwrap();
        let m = build_m(&k, &border).unwrap();
        assert_eq!(m, m.adjoint());
    }

    #[test]
    fn m_for_scalar_k() {
        let k = ComplexMatrix::zeros(1, 1);
        let m = build_m(&k, &BorderVector::new(vec![c(1.0, 0.0)]).unwrap()).unwrap();
        assert_eq!(
            m,
            ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
        );
    }

    #[test]
    fn m_with_zero_border_is_singular() {
        let k = ComplexMatrix::identity(2);
        // BorderVector rejects c = 0, so build the bordered matrix by hand.
        let m = ComplexMatrix::from_fn(3, 3, |i, j| {
            if i < 2 && j < 2 {
                k[(i, j)]
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(factorize(&m).is_err());
        assert!(BorderVector::new(vec![c(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn border_length_checked() {
        let k = ComplexMatrix::identity(2);
        assert!(build_m(&k, &BorderVector::new(vec![c(1.0, 0.0)]).unwrap()).is_err());
    }
}
