mod common;

use common::*;
use proptest::prelude::*;
use tls_cond::cond_exact::svd_condition;
use tls_cond::generators::{generate_ab_alpha, rng_for};
use tls_cond::perturb_lab::{
    convergence_study, directional_derivative_norm, first_order_prediction, fit_slope, monte_carlo_validate,
    perturbation_ratio, worst_direction, PerturbationDirection, ValidationConfig,
};
use tls_cond::TlsError;

#[test]
fn remainder_shrinks_tenfold_per_decade() {
    for seed in 1..5 {
        let s = solve_with_k(generate_ab_alpha(25, 6, 0.3, seed).unwrap());
        let dir = PerturbationDirection::random(25, 6, &mut rng_for(seed, 99)).unwrap();
        let scale = s.problem.augmented_norm();
        let t_list: Vec<f64> = [1e-3, 1e-4, 1e-5, 1e-6].iter().map(|r| r * scale).collect();
        let pts = convergence_study(&s.problem, &s.solution, &s.work, &dir, &t_list).unwrap();
        for w in pts.windows(2) {
            let drop = w[0].remainder / w[1].remainder;
            assert!((5.0..20.0).contains(&drop), "seed {seed}: {pts:?}");
        }
        let slope = fit_slope(&pts).unwrap();
        assert!((slope - 1.0).abs() < 0.1, "slope {slope}");
    }
}

#[test]
fn first_order_prediction_is_second_order_accurate() {
    let s = solve_with_k(generate_ab_alpha(12, 3, 0.5, 7).unwrap());
    let dir = PerturbationDirection::random(12, 3, &mut rng_for(7, 1)).unwrap();
    let err = |t: f64| {
        let p = s.problem.perturbed(&dir.delta_a, &dir.delta_b, t).unwrap();
        let x = solve(p).solution.x;
        (x - first_order_prediction(&s.work, &s.solution, &dir, t).unwrap()).norm()
    };
    let ratio = err(1e-3) / err(5e-4);
    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn worst_direction_attains_kappa() {
    for seed in 1..4 {
        let s = solve_with_k(generate_ab_alpha(20, 5, 0.2, seed).unwrap());
        let kappa = svd_condition(&s.work, &s.problem, &s.solution).unwrap().kappa_abs;
        let worst = worst_direction(&s.work).unwrap();
        assert!(rel_diff(worst.frobenius_norm(), 1.0) < 1e-14);
        assert!(rel_diff(directional_derivative_norm(&s.work, &worst).unwrap(), kappa) < 1e-10);
        let t = 1e-8 * s.problem.augmented_norm();
        let ratio = perturbation_ratio(&s.problem, &s.solution, &worst, t).unwrap();
        assert!(rel_diff(ratio, kappa) < 1e-3);
    }
}

#[test]
fn large_steps_are_refused() {
    // b₂ = 2.5 pushes σ_{n+1} past σ̂ₙ = 2
    let s = solve(fix_a());
    let dir = PerturbationDirection::unit_b(2, 1, 1);
    assert!(matches!(
        perturbation_ratio(&s.problem, &s.solution, &dir, 1.5),
        Err(TlsError::PerturbationTooLarge(_))
    ));
    assert!(matches!(
        perturbation_ratio(&s.problem, &s.solution, &dir, 0.0),
        Err(TlsError::InvalidArgument(_))
    ));
}

#[test]
fn validation_is_deterministic() {
    let p = generate_ab_alpha(15, 4, 0.4, 3).unwrap();
    let cfg = ValidationConfig::new(20, 5);
    let a = monte_carlo_validate(&p, &cfg).unwrap();
    let b = monte_carlo_validate(&p, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.sound() && a.attained());
    assert_eq!(a.ratios.len(), 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_directions_never_beat_kappa(
        n in 1usize..5,
        extra in 1usize..8,
        log_alpha in -2.0f64..-0.05,
        seed in any::<u64>(),
    ) {
        let m = n + extra;
        let s = solve_with_k(generate_ab_alpha(m, n, 10f64.powf(log_alpha), seed).unwrap());
        prop_assume!(s.solution.gap.rel_gap >= 1e-3);
        let kappa = svd_condition(&s.work, &s.problem, &s.solution).unwrap().kappa_abs;
        let dir = PerturbationDirection::random(m, n, &mut rng_for(seed, 7)).unwrap();
        prop_assert!(directional_derivative_norm(&s.work, &dir).unwrap() <= kappa * (1.0 + 1e-12));
        let t = 1e-8 * s.problem.augmented_norm();
        let ratio = perturbation_ratio(&s.problem, &s.solution, &dir, t).unwrap();
        prop_assert!(ratio <= kappa * 1.001);
    }
}
