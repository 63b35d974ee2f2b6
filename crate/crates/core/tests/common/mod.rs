//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use neardefect::gallery;
use neardefect::implicit::{
    evaluate_f_and_gradient, initialize, newton_solve, BorderVector, InitStrategy, IterateState,
    NewtonOutcome, NewtonSettings, ProblemInstance,
};
use neardefect::linalg::{normalized, smallest_singular_triplet, ComplexMatrix};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Determinant by cofactor expansion along the first remaining row, memoized
/// over the set of remaining columns.
pub fn det_cofactor(m: &ComplexMatrix) -> Complex64 {
    fn go(
        m: &ComplexMatrix,
        row: usize,
        cols: u32,
        memo: &mut HashMap<u32, Complex64>,
    ) -> Complex64 {
        if cols == 0 {
            return c64(1.0, 0.0);
        }
        if let Some(v) = memo.get(&cols) {
            return *v;
        }
        let mut acc = c64(0.0, 0.0);
        let mut sign = 1.0;
        for j in 0..m.cols() {
            if cols & (1 << j) == 0 {
                continue;
            }
            let e = m[(row, j)];
            if e != c64(0.0, 0.0) {
                acc += e * sign * go(m, row + 1, cols & !(1 << j), memo);
            }
            sign = -sign;
        }
        memo.insert(cols, acc);
        acc
    }
    assert!(m.is_square() && m.rows() <= 20);
    go(m, 0, (1u32 << m.rows()) - 1, &mut HashMap::new())
}

/// Eigenvalues of a Hermitian matrix by cyclic complex Jacobi rotations, ascending.
pub fn hermitian_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
    let n = h.rows();
    let mut a: Vec<Vec<Complex64>> = (0..n).map(|i| h.row(i).to_vec()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j].norm_sqr())
            .sum();
        let total: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum();
        if off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq.norm() == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p][p].re, a[q][q].re);
                // Unitary rotation zeroing (p,q): phase-strip apq, then a real Jacobi rotation.
                let phase = apq / apq.norm();
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (s, c) = theta.sin_cos();
                // Columns: col_p' = c·col_p − s·conj(phase)·col_q, col_q' = s·phase·col_p + c·col_q.
                for row in a.iter_mut() {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = xp * c - xq * phase.conj() * s;
                    row[q] = xp * phase * s + xq * c;
                }
                for k in 0..n {
                    let (xp, xq) = (a[p][k], a[q][k]);
                    a[p][k] = xp * c - xq * phase * s;
                    a[q][k] = xp * phase.conj() * s + xq * c;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i].re).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Singular values of `b`, ascending, as square roots of the eigenvalues of `BᴴB`.
pub fn singular_values(b: &ComplexMatrix) -> Vec<f64> {
    hermitian_eigenvalues(&b.adjoint().matmul(b))
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect()
}

pub fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexMatrix::from_fn(n, n, |_, _| {
        c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn complex_entry() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| c64(re, im))
}

pub fn square_matrix(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = ComplexMatrix> {
    n.prop_flat_map(|n| {
        proptest::collection::vec(complex_entry(), n * n)
            .prop_map(move |data| ComplexMatrix::from_row_major(n, n, data).unwrap())
    })
}

pub fn rel_frobenius(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.sub(b).norm_fro() / a.norm_fro().max(f64::MIN_POSITIVE)
}

pub struct ReferenceRun {
    pub name: &'static str,
    pub a: ComplexMatrix,
    pub outcome: NewtonOutcome,
}

fn solve(
    name: &'static str,
    a: ComplexMatrix,
    z0: Complex64,
    strategy: InitStrategy,
) -> ReferenceRun {
    let problem = ProblemInstance::new(a.clone()).unwrap();
    let start = initialize(&problem, z0, &strategy).unwrap();
    let outcome = newton_solve(&problem, &NewtonSettings::default(), &start)
        .unwrap_or_else(|e| panic!("{name}: {e}"));
    ReferenceRun { name, a, outcome }
}

/// The five small examples from their reference starting points.
pub fn reference_runs() -> Vec<ReferenceRun> {
    vec![
        solve(
            "kahan6",
            gallery::kahan(6, 0.1).unwrap(),
            c64(0.0, 0.0),
            InitStrategy::Svd,
        ),
        solve(
            "kahan15",
            gallery::kahan(15, 0.1).unwrap(),
            c64(0.12, 0.0),
            InitStrategy::UnshiftedSvd,
        ),
        solve(
            "kahan20",
            gallery::kahan(20, 0.1).unwrap(),
            c64(0.115, 0.0),
            InitStrategy::UnshiftedSvd,
        ),
        solve(
            "grcar6",
            gallery::grcar(6).unwrap(),
            c64(0.0, -1.0),
            InitStrategy::SvdWithEpsilon(0.0),
        ),
        solve(
            "grcar20",
            gallery::grcar(20).unwrap(),
            c64(0.0, -2.5),
            InitStrategy::SvdWithEpsilon(0.0),
        ),
    ]
}

/// Fully evaluated state at a point, border held fixed.
pub fn full_state(
    p: &ProblemInstance,
    c: &BorderVector,
    alpha: f64,
    beta: f64,
    epsilon: f64,
) -> IterateState {
    let mut point = evaluate_f_and_gradient(p, c, alpha, beta, epsilon).unwrap();
    point.evaluate_jacobian().unwrap();
    point.into_state()
}

/// Border `c = [u; v]` from the smallest triplet of `A − zI`.
pub fn triplet_border(a: &ComplexMatrix, z: Complex64) -> (f64, BorderVector) {
    let t = smallest_singular_triplet(&a.shifted(z)).unwrap();
    let mut x = t.u;
    x.extend(t.v);
    (t.sigma, BorderVector::new(normalized(&x)).unwrap())
}

/// `|analytic − reference| / max(|reference|, floor)`.
fn rel(analytic: f64, reference: f64, floor: f64) -> f64 {
    (analytic - reference).abs() / reference.abs().max(floor).max(f64::MIN_POSITIVE)
}

pub struct FdReport {
    /// Names and relative errors of f_α, f_β, f_ε.
    pub first: Vec<(&'static str, f64)>,
    /// Names and relative errors of f_αα, f_αβ, f_ββ, f_αε, f_βε.
    pub second: Vec<(&'static str, f64)>,
}

impl FdReport {
    pub fn worst(&self) -> (&'static str, f64) {
        self.first
            .iter()
            .chain(&self.second)
            .copied()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
    }
}

/// Central differences with step `h`: first derivatives from `f`, second
/// derivatives from the analytic first derivatives. Relative errors use a
/// denominator floored at 1e-3 of the largest value in the same family.
pub fn fd_check(
    p: &ProblemInstance,
    c: &BorderVector,
    alpha: f64,
    beta: f64,
    epsilon: f64,
    h: f64,
) -> FdReport {
    let s = full_state(p, c, alpha, beta, epsilon);
    let so = s.second.clone().unwrap();
    let at = |da: f64, db: f64, de: f64| {
        evaluate_f_and_gradient(p, c, alpha + da, beta + db, epsilon + de)
            .unwrap()
            .into_state()
    };
    let (ap, am) = (at(h, 0.0, 0.0), at(-h, 0.0, 0.0));
    let (bp, bm) = (at(0.0, h, 0.0), at(0.0, -h, 0.0));
    let (ep, em) = (at(0.0, 0.0, h), at(0.0, 0.0, -h));
    let d = |x: f64, y: f64| (x - y) / (2.0 * h);

    let first_pairs = [
        ("f_alpha", s.f_alpha, d(ap.f, am.f)),
        ("f_beta", s.f_beta, d(bp.f, bm.f)),
        ("f_epsilon", so.f_epsilon, d(ep.f, em.f)),
    ];
    let second_pairs = [
        ("f_alphaalpha", so.f_alphaalpha, d(ap.f_alpha, am.f_alpha)),
        ("f_alphabeta", so.f_alphabeta, d(bp.f_alpha, bm.f_alpha)),
        ("f_betabeta", so.f_betabeta, d(bp.f_beta, bm.f_beta)),
        (
            "f_alphaepsilon",
            so.f_alphaepsilon,
            d(ep.f_alpha, em.f_alpha),
        ),
        ("f_betaepsilon", so.f_betaepsilon, d(ep.f_beta, em.f_beta)),
    ];
    let family = |pairs: &[(&'static str, f64, f64)]| {
        let scale = pairs.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
        pairs
            .iter()
            .map(|&(n, a, r)| (n, rel(a, r, 1e-3 * scale)))
            .collect::<Vec<_>>()
    };
    FdReport {
        first: family(&first_pairs),
        second: family(&second_pairs),
    }
}

/// Relative errors of `f_xy ≈ −(xᴴx)·ε_xy` at a root, where `ε(α, β)` is the
/// signed branch `sign(ε*)·σ_min(A − (α+iβ)I)` and `ε_xy` a central second
/// difference with step `h`.
pub fn curvature_check(a: &ComplexMatrix, s: &IterateState, h: f64) -> Vec<(&'static str, f64)> {
    let sign = s.epsilon.signum();
    let sigma = |da: f64, db: f64| {
        sign * smallest_singular_triplet(&a.shifted(c64(s.alpha + da, s.beta + db)))
            .unwrap()
            .sigma
    };
    let s0 = sigma(0.0, 0.0);
    let e_aa = (sigma(h, 0.0) - 2.0 * s0 + sigma(-h, 0.0)) / (h * h);
    let e_bb = (sigma(0.0, h) - 2.0 * s0 + sigma(0.0, -h)) / (h * h);
    let e_ab = (sigma(h, h) - sigma(h, -h) - sigma(-h, h) + sigma(-h, -h)) / (4.0 * h * h);
    let xx = neardefect::linalg::norm2(&s.x).powi(2);
    let so = s.second.as_ref().unwrap();
    let pairs = [
        ("f_alphaalpha", so.f_alphaalpha, -xx * e_aa),
        ("f_alphabeta", so.f_alphabeta, -xx * e_ab),
        ("f_betabeta", so.f_betabeta, -xx * e_bb),
    ];
    let scale = pairs.iter().map(|t| t.2.abs()).fold(0.0, f64::max);
    pairs
        .iter()
        .map(|&(n, x, r)| (n, rel(x, r, 1e-3 * scale)))
        .collect()
}

/// Points near the smallest singular value surface: `z` in the box, `ε` a
/// random multiple in [0.5, 1.5] of `σ_min(A − zI)`, border from the triplet.
pub fn fd_points(re: (f64, f64), im: (f64, f64)) -> impl Strategy<Value = (f64, f64, f64)> {
    (re.0..re.1, im.0..im.1, 0.5f64..1.5)
}

/// Runner with a fixed seed so sampled points are the same on every run.
pub fn deterministic_runner(cases: u32) -> proptest::test_runner::TestRunner {
    use proptest::test_runner::{RngAlgorithm, TestRng, TestRunner};
    TestRunner::new_with_rng(
        ProptestConfig::with_cases(cases),
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

/// Test matrices for the derivative checks with a sampling box for `z`.
pub fn fd_matrices() -> Vec<(&'static str, ComplexMatrix, (f64, f64), (f64, f64))> {
    vec![
        (
            "kahan6",
            gallery::kahan(6, 0.1).unwrap(),
            (0.0, 1.0),
            (-0.3, 0.3),
        ),
        (
            "grcar6",
            gallery::grcar(6).unwrap(),
            (-1.0, 2.0),
            (-2.5, 2.5),
        ),
        ("random5", random_matrix(5, 7), (-1.0, 1.0), (-1.0, 1.0)),
    ]
}

/// Largest relative finite-difference error over `cases` sampled points.
pub fn fd_worst(
    a: &ComplexMatrix,
    re: (f64, f64),
    im: (f64, f64),
    cases: u32,
) -> (&'static str, f64) {
    let problem = ProblemInstance::new(a.clone()).unwrap();
    let worst = std::cell::Cell::new(("none", 0.0f64));
    deterministic_runner(cases)
        .run(&fd_points(re, im), |(x, y, t)| {
            let (sigma, c) = triplet_border(a, c64(x, y));
            let w = fd_check(&problem, &c, x, y, t * sigma, 1e-6).worst();
            if w.1 > worst.get().1 {
                worst.set(w);
            }
            Ok(())
        })
        .unwrap();
    worst.get()
}
