use log::warn;
use num_complex::Complex64;

use super::{
    evaluate_f_and_gradient, BorderVector, BorderedPoint, IterateState, NewtonError,
    ProblemInstance,
};
use crate::linalg::{normalized, smallest_singular_triplet, ComplexVector};

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Stop once `‖g‖₂ < tol`.
    pub tol: f64,
    /// Maximum number of Newton updates.
    pub max_iter: usize,
    /// Condition estimate of `M` above which the border is replaced (once).
    pub ill_condition_threshold: f64,
    /// Warn at convergence when `|F_αβ| < threshold · f_ε²`.
    pub degeneracy_threshold: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iter: 50,
            ill_condition_threshold: 1e12,
            degeneracy_threshold: 1e-8,
        }
    }
}

impl NewtonSettings {
    fn validate(&self) -> Result<(), NewtonError> {
        if !(self.tol > 0.0) {
            return Err(NewtonError::InvalidSettings(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(NewtonError::InvalidSettings(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the convergence history; row `i` describes iterate `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub g_norm: f64,
    pub f_alphabeta: f64,
    /// Largest relative imaginary part discarded at this iterate.
    pub imag_leak: f64,
}

/// Linear-algebra work spent on one iterate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepCost {
    pub factorizations: usize,
    pub solves: usize,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub records: Vec<ConvergenceRecord>,
    /// Fully evaluated state at the accepted iterate.
    pub state: IterateState,
    /// Aligned with `records`.
    pub costs: Vec<StepCost>,
    pub border: BorderVector,
    pub rebordered: bool,
    pub warnings: Vec<String>,
}

impl NewtonOutcome {
    /// Number of Newton updates taken.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    /// Distance `|ε|`; `(ε, u)` and `(−ε, −u)` describe the same triplet.
    pub fn epsilon_star(&self) -> f64 {
        self.state.epsilon.abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StartPoint {
    pub alpha0: f64,
    pub beta0: f64,
    pub epsilon0: f64,
    pub border: BorderVector,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitStrategy {
    /// `(ε₀, u₀, v₀)` is the smallest singular triplet of `A − z₀I`.
    Svd,
    /// Singular vectors from the smallest triplet, `ε₀` given.
    SvdWithEpsilon(f64),
    /// `(ε₀, u₀, v₀)` is the smallest singular triplet of `A` itself; only
    /// `(α₀, β₀)` come from `z₀`.
    UnshiftedSvd,
    /// Everything given.
    Explicit {
        epsilon0: f64,
        u0: ComplexVector,
        v0: ComplexVector,
    },
}

/// Starting point `(Re z₀, Im z₀, ε₀)` with border `c = x₀ = [u₀; v₀]`.
pub fn initialize(
    problem: &ProblemInstance,
    z0: Complex64,
    strategy: &InitStrategy,
) -> Result<StartPoint, NewtonError> {
    let n = problem.n();
    let (epsilon0, u0, v0) = match strategy {
        InitStrategy::UnshiftedSvd => {
            let t = smallest_singular_triplet(problem.matrix())?;
            (t.sigma, t.u, t.v)
        }
        InitStrategy::Svd | InitStrategy::SvdWithEpsilon(_) => {
            let t = smallest_singular_triplet(&problem.matrix().shifted(z0))?;
            let eps = match strategy {
                InitStrategy::SvdWithEpsilon(e) => *e,
                _ => t.sigma,
            };
            (eps, t.u, t.v)
        }
        InitStrategy::Explicit { epsilon0, u0, v0 } => {
            if u0.len() != n || v0.len() != n {
                return Err(NewtonError::DimensionMismatch(format!(
                    "start vectors of length {} and {} for n = {}",
                    u0.len(),
                    v0.len(),
                    n
                )));
            }
            (*epsilon0, u0.clone(), v0.clone())
        }
    };
    if !epsilon0.is_finite() || !z0.re.is_finite() || !z0.im.is_finite() {
        return Err(NewtonError::InvalidSettings(
            "non-finite starting point".into(),
        ));
    }
    let mut x0 = u0;
    x0.extend(v0);
    Ok(StartPoint {
        alpha0: z0.re,
        beta0: z0.im,
        epsilon0,
        border: BorderVector::new(x0)?,
    })
}

/// `g = (f, f_α, f_β)`.
pub fn assemble_g(state: &IterateState) -> [f64; 3] {
    [state.f, state.f_alpha, state.f_beta]
}

/// Rows `(f_α, f_β, f_ε)`, `(f_αα, f_αβ, f_αε)`, `(f_βα, f_ββ, f_βε)` with
/// `f_βα = f_αβ`. `None` before the Jacobian solves have run.
pub fn assemble_jacobian(state: &IterateState) -> Option<[[f64; 3]; 3]> {
    let s = state.second.as_ref()?;
    Some([
        [state.f_alpha, state.f_beta, s.f_epsilon],
        [s.f_alphaalpha, s.f_alphabeta, s.f_alphaepsilon],
        [s.f_alphabeta, s.f_betabeta, s.f_betaepsilon],
    ])
}

fn evaluate_full(
    problem: &ProblemInstance,
    border: &BorderVector,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> Result<BorderedPoint, NewtonError> {
    let mut point = evaluate_f_and_gradient(problem, border, alpha, beta, epsilon)?;
    point.evaluate_jacobian()?;
    Ok(point)
}

/// Undamped Newton iteration on `g(α, β, ε) = 0` with a fixed border.
///
/// Every iterate, including the start, is evaluated and recorded. If `M`
/// turns out singular or its condition estimate exceeds the threshold, the
/// border is replaced once by the normalized current `x` and the point is
/// re-evaluated; a second failure is reported.
pub fn newton_solve(
    problem: &ProblemInstance,
    settings: &NewtonSettings,
    start: &StartPoint,
) -> Result<NewtonOutcome, NewtonError> {
    settings.validate()?;
    if start.border.len() != 2 * problem.n() {
        return Err(NewtonError::DimensionMismatch(format!(
            "border of length {} for n = {}",
            start.border.len(),
            problem.n()
        )));
    }
    let mut border = start.border.clone();
    let (mut alpha, mut beta, mut epsilon) = (start.alpha0, start.beta0, start.epsilon0);
    let mut rebordered = false;
    let mut last_x: Option<ComplexVector> = None;
    let mut records = Vec::new();
    let mut costs = Vec::new();
    let mut warnings = Vec::new();

    for i in 0..=settings.max_iter {
        let mut cost = StepCost {
            factorizations: 0,
            solves: 0,
        };
        let point = loop {
            let attempt = evaluate_full(problem, &border, alpha, beta, epsilon);
            cost.factorizations += 1;
            let replacement = match &attempt {
                Ok(p) => {
                    cost.solves += p.factorization().solve_count();
                    let cond = p.state().cond_estimate;
                    if cond <= settings.ill_condition_threshold {
                        break attempt?;
                    }
                    if rebordered {
                        return Err(NewtonError::IllConditionedBorder { cond, records });
                    }
                    let msg = format!(
                        "iteration {i}: condition estimate {cond:.3e} of M, replacing border"
                    );
                    warn!("{msg}");
                    warnings.push(msg);
                    p.state().x.clone()
                }
                Err(NewtonError::SingularBorderedMatrix { .. })
                    if !rebordered && last_x.is_some() =>
                {
                    let msg = format!("iteration {i}: bordered matrix singular, replacing border");
                    warn!("{msg}");
                    warnings.push(msg);
                    last_x.clone().unwrap()
                }
                Err(_) => return attempt.map(|_| unreachable!()),
            };
            border = BorderVector::new(normalized(&replacement))?;
            rebordered = true;
        };

        let state = point.into_state();
        let jac = assemble_jacobian(&state).expect("Jacobian evaluated");
        let g = assemble_g(&state);
        let g_norm = state.g_norm();
        let f_ab = state.f_alphabeta_det().expect("Jacobian evaluated");
        records.push(ConvergenceRecord {
            iteration: i,
            alpha,
            beta,
            epsilon,
            g_norm,
            f_alphabeta: f_ab,
            imag_leak: state.imag_leak,
        });
        costs.push(cost);

        if g_norm < settings.tol {
            let f_eps = jac[0][2];
            if f_ab.abs() < settings.degeneracy_threshold * f_eps * f_eps {
                let msg = format!(
                    "F_αβ = {f_ab:.3e} is tiny relative to f_ε² = {:.3e}; a Jordan block larger than 2 may be nearby",
                    f_eps * f_eps
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            return Ok(NewtonOutcome {
                records,
                state,
                costs,
                border,
                rebordered,
                warnings,
            });
        }
        if i == settings.max_iter {
            break;
        }

        let det = det3(&jac);
        let scale = jac[0][2].abs().max(1.0);
        if !(det.abs() >= 1e-14 * scale * scale * scale) {
            return Err(NewtonError::SingularJacobian { det, records });
        }
        let step = solve3(jac, [-g[0], -g[1], -g[2]]);
        alpha += step[0];
        beta += step[1];
        epsilon += step[2];
        last_x = Some(state.x);
    }
    Err(NewtonError::MaxIterationsExceeded { records })
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for k in 0..3 {
        let p = (k..3)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..3 {
            let l = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= l * a[k][j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}
