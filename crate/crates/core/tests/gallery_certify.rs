mod common;

use common::{c64, reference_runs, singular_values};
use neardefect::certify::{certify, saddle_check, sigma_min_grid, CertifyTolerances};
use neardefect::gallery::{self, GallerySpec};
use neardefect::linalg::{eigenvalues_diagnostic, norm2, ComplexMatrix};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kahan_diagonal_decreases_to_target(n in 2usize..40, target in 0.01f64..0.9) {
        let k = gallery::kahan(n, target).unwrap();
        let d: Vec<f64> = k.diagonal().iter().map(|z| z.re).collect();
        prop_assert!(d.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((d[n - 1] - target).abs() <= 1e-15);
        for i in 0..n {
            for j in 0..i {
                prop_assert_eq!(k[(i, j)], c64(0.0, 0.0));
            }
        }
    }

    #[test]
    fn generators_are_deterministic(n in 6usize..30) {
        for spec in [GallerySpec::kahan(n), GallerySpec::grcar(n), GallerySpec::embedded_kahan(n)] {
            let (p, q) = (spec.build().unwrap(), spec.build().unwrap());
            prop_assert!(p.as_slice().iter().zip(q.as_slice()).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
        }
    }

    #[test]
    fn grcar_band_is_exact(n in 2usize..30) {
        let g = gallery::grcar(n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let d = j as i64 - i as i64;
                let want = match d { -1 => -1.0, 0..=3 => 1.0, _ => 0.0 };
                prop_assert_eq!(g[(i, j)], c64(want, 0.0));
            }
        }
    }
}

#[test]
fn kahan_examples() {
    let k = gallery::kahan(6, 0.1).unwrap();
    let s = 0.1f64.powf(0.2);
    assert!((k[(4, 4)].re - 1.5849e-1).abs() <= 1e-4);
    assert!((k[(5, 5)].re - 0.1).abs() <= 1e-15);
    assert!((k[(1, 3)].re + s * (1.0 - s * s).sqrt()).abs() <= 1e-15);
    assert!((singular_values(&k)[0] - 9.9694e-3).abs() <= 5e-8);

    let k2 = gallery::kahan(2, 0.1).unwrap();
    let want = ComplexMatrix::from_real(2, 2, &[1.0, -(0.99f64).sqrt(), 0.0, 0.1]).unwrap();
    assert!(k2.sub(&want).norm_fro() <= 1e-15);
    assert!(gallery::kahan(1, 0.1).is_err() && gallery::kahan(5, 1.5).is_err());
}

#[test]
fn grcar20_spectrum_is_closed_under_conjugation() {
    let ev = eigenvalues_diagnostic(&gallery::grcar(20).unwrap()).unwrap();
    for l in &ev {
        let d = ev
            .iter()
            .map(|m| (m - l.conj()).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(d <= 1e-8, "{l}: {d:.2e}");
    }
}

#[test]
fn embedded_kahan_blocks() {
    let e = gallery::embedded_kahan(8, 6).unwrap();
    let k = gallery::kahan(6, 0.1).unwrap();
    for i in 0..8 {
        for j in 0..8 {
            let want = if i < 6 && j < 6 {
                k[(i, j)]
            } else {
                c64(if i == j { 1.0 } else { 0.0 }, 0.0)
            };
            assert_eq!(e[(i, j)], want);
        }
    }
    assert_eq!(gallery::embedded_kahan(6, 6).unwrap(), k);
    assert!(gallery::embedded_kahan(5, 6).is_err());
}

#[test]
fn certificates_of_reference_runs() {
    let tol = CertifyTolerances::default();
    for run in reference_runs() {
        let name = run.name;
        let c = certify(&run.a, &run.outcome.state, &tol).unwrap_or_else(|e| panic!("{name}: {e}"));
        let eps = run.outcome.epsilon_star();
        assert_eq!(c.epsilon_star, eps);
        assert!((norm2(&c.u_star) - 1.0).abs() <= 1e-14 && (norm2(&c.v_star) - 1.0).abs() <= 1e-14);
        assert!(
            (run.a.sub(&c.b).norm_fro() - eps).abs() <= 1e-12 * eps,
            "{name}"
        );
        assert!(
            (c.perturbation_spectral - eps).abs() <= 1e-12 * eps,
            "{name}"
        );
        assert!(
            (singular_values(&run.a.sub(&c.b)).last().unwrap() - eps).abs() <= 1e-10 * eps,
            "{name}"
        );
        let bv = c.b.shifted(c.z_star).mul_vec(&c.v_star);
        assert!(norm2(&bv) <= 1e-8 * run.a.norm_fro(), "{name}");
        assert!(c.sigma_min_shifted <= 1e-8 * run.a.norm_fro(), "{name}");
        assert!(c.orthogonality <= 1e-10, "{name}");
        assert!(
            c.residual_right.max(c.residual_left) <= 1e-10 * run.a.norm_fro(),
            "{name}"
        );
        assert!(c.f_alphabeta.unwrap() < 0.0, "{name}");
    }
}

#[test]
fn coalescing_pairs_match_reference() {
    let runs = reference_runs();
    let tol = CertifyTolerances::default();
    let pair = |name: &str| {
        let run = runs.iter().find(|r| r.name == name).unwrap();
        let mut p = certify(&run.a, &run.outcome.state, &tol)
            .unwrap()
            .coalescing_pair
            .unwrap();
        p.sort_by(|x, y| x.re.total_cmp(&y.re));
        p
    };
    let k = pair("kahan6");
    assert!(
        (k[0] - c64(1.0e-1, 0.0)).norm() <= 1e-4 && (k[1] - c64(1.5849e-1, 0.0)).norm() <= 1e-4
    );
    let g = pair("grcar20");
    assert!((g[0] - c64(1.0802e-1, -2.2253)).norm() <= 1e-4, "{:?}", g);
    assert!((g[1] - c64(2.1882e-1, -2.1132)).norm() <= 1e-4, "{:?}", g);
}

#[test]
fn jordan_block_certifies_with_zero_residuals() {
    use neardefect::implicit::IterateState;
    let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let zero = vec![c64(0.0, 0.0); 4];
    let state = IterateState {
        alpha: 0.0,
        beta: 0.0,
        epsilon: 0.0,
        x: vec![c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
        f: 0.0,
        f_alpha: 0.0,
        f_beta: 0.0,
        x_alpha: zero.clone(),
        x_beta: zero,
        second: None,
        cond_estimate: 1.0,
        imag_leak: 0.0,
    };
    let c = certify(&a, &state, &CertifyTolerances::default()).unwrap();
    assert_eq!(c.b, a);
    assert_eq!(
        (c.residual_right, c.residual_left, c.orthogonality),
        (0.0, 0.0, 0.0)
    );
}

#[test]
fn grid_examples() {
    let eye = sigma_min_grid(&ComplexMatrix::identity(2), (0.0, 2.0), (-1.0, 1.0), (3, 3)).unwrap();
    assert!(eye.values[1][1] <= 1e-14);
    let diag = ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
    let g = sigma_min_grid(&diag, (0.0, 1.0), (0.0, 1.0), (3, 2)).unwrap();
    assert!((g.values[0][1] - 0.5).abs() <= 1e-14);
    assert_eq!(
        (g.re.len(), g.im.len(), g.values.len(), g.values[0].len()),
        (3, 2, 2, 3)
    );
    assert!(g.values.iter().flatten().all(|v| *v >= 0.0));
}

#[test]
fn grid_at_root_equals_distance() {
    let run = reference_runs().into_iter().next().unwrap();
    let z = run.outcome.state.z();
    let g = sigma_min_grid(&run.a, (z.re, z.re + 1e-3), (0.0, 1e-3), (2, 2)).unwrap();
    assert!((g.values[0][0] - run.outcome.epsilon_star()).abs() <= 1e-12);
}

#[test]
fn grid_is_symmetric_for_real_matrices() {
    let a = gallery::grcar(8).unwrap();
    let g = sigma_min_grid(&a, (-1.0, 2.0), (-2.5, 2.5), (7, 9)).unwrap();
    for (row, mirror) in g.values.iter().zip(g.values.iter().rev()) {
        for (p, q) in row.iter().zip(mirror) {
            assert!((p - q).abs() <= 1e-10);
        }
    }
}

#[test]
fn grid_csv_layout() {
    let g = sigma_min_grid(&ComplexMatrix::identity(2), (0.0, 1.0), (0.0, 2.0), (2, 3)).unwrap();
    let mut out = Vec::new();
    g.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "re,im,sigma_min");
    assert_eq!(lines.len(), 7);
    assert!(lines[2].starts_with("1.0000000000000000e0,0.0000000000000000e0,"));
    assert!(lines[3].starts_with("0.0000000000000000e0,1.0000000000000000e0,"));
}

#[test]
fn roots_are_saddles_of_the_singular_value_surface() {
    for run in reference_runs()
        .into_iter()
        .filter(|r| r.name == "kahan6" || r.name == "grcar6")
    {
        let r = saddle_check(
            &run.a,
            run.outcome.state.z(),
            run.outcome.epsilon_star(),
            1e-3,
        )
        .unwrap();
        assert!(r.saddle_signature && !r.degenerate, "{}: {r:?}", run.name);
        assert!(r.circle_min_gap <= 10.0 * 1e-6, "{}: {r:?}", run.name);
    }
    let jordan = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
    assert!(
        saddle_check(&jordan, c64(0.0, 0.0), 0.0, 1e-3)
            .unwrap()
            .degenerate
    );
}
