mod common;

use common::*;
use proptest::prelude::*;
use tls_cond::cond_bounds::{
    bounds_report, kappa2_dominance, kappa2_factor, upper_kappa2, BoundFamily, VERDICT_TOL,
};
use tls_cond::generators::generate_ab_alpha;
use tls_cond::tls::{residual_diagnostics, GolubCheck};
use tls_cond::TlsError;

#[test]
fn orthogonal_split_lemma() {
    for seed in 0..100 {
        let (a1, a2) = orthogonal_split(6, seed);
        assert!((a1.transpose() * &a2).norm() < 1e-12 * a1.norm() * a2.norm());
        assert!(orthogonal_split_violation(&a1, &a2) <= 1e-12, "seed {seed}");
    }
}

#[test]
fn fixture_bound_values() {
    let s = solve(fix_b());
    let phi = phi();
    let r = bounds_report(&s.problem, &s.bundle, &s.solution, &s.work).unwrap();
    let k1 = r.pair(BoundFamily::Kappa1).upper.unwrap();
    assert!(rel_diff(k1, 5f64.sqrt() * phi) < 1e-10);
    let k2 = r.pair(BoundFamily::Kappa2Lower).lower.unwrap();
    assert!(rel_diff(k2, (1.0 + phi * phi).sqrt() / (1.0 - 1.0 / (phi * phi)).sqrt()) < 1e-10);
    assert!(rel_diff(r.pair(BoundFamily::Bhm).upper.unwrap(), phi * phi) < 1e-10);
    assert_eq!(r.relative_pair(BoundFamily::Bhm).upper, r.pair(BoundFamily::Bhm).upper);
    assert!(r.all_hold());
}

#[test]
fn zero_solution_collapses_sharp_sandwich() {
    let s = solve(fix_a());
    let r = bounds_report(&s.problem, &s.bundle, &s.solution, &s.work).unwrap();
    let sharp = r.pair(BoundFamily::SharpSandwich);
    assert_eq!(sharp.lower, sharp.upper);
    assert!(rel_diff(sharp.upper.unwrap(), r.kappa_reference) < 1e-14);
    assert!(r.relative_pair(BoundFamily::Bhm).upper.is_none());
    assert_eq!(r.factor_four, None);
}

#[test]
fn kappa2_upper_needs_small_alpha() {
    let s = solve(generate_ab_alpha(20, 5, 0.9, 1).unwrap());
    assert!(matches!(upper_kappa2(&s.bundle, &s.solution), Err(TlsError::NotApplicable(_))));
}

#[test]
fn kappa2_factor_values() {
    assert_eq!(kappa2_factor(0.0), 1.0);
    assert!(rel_diff(kappa2_factor(0.953), 17.822) < 1e-4);
    assert!(kappa2_factor(0.5) < kappa2_factor(0.6));
}

fn arb_problem() -> impl Strategy<Value = (usize, usize, f64, u64)> {
    (1usize..8, 1usize..12, -8.0f64..-0.02, any::<u64>())
        .prop_map(|(n, extra, log_alpha, seed)| (n + extra, n, 10f64.powf(log_alpha), seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certified_bounds_enclose_kappa((m, n, alpha, seed) in arb_problem()) {
        let s = solve(generate_ab_alpha(m, n, alpha, seed).unwrap());
        let r = bounds_report(&s.problem, &s.bundle, &s.solution, &s.work).unwrap();
        for family in BoundFamily::ALL.into_iter().filter(|f| f.is_certified()) {
            prop_assert_ne!(r.pair(family).encloses(r.kappa_reference, VERDICT_TOL), Some(false), "{:?}", family);
        }
        prop_assert!(r.violations().is_empty());
        prop_assert_eq!(r.factor_four, Some(true));
        prop_assert!(r.upper_chain.holds());
        if s.solution.alpha <= 0.5 {
            prop_assert!(r.sharpness(BoundFamily::SharpSandwich).unwrap() < 4.0);
        } else {
            prop_assert!(r.sharpness(BoundFamily::SimpleSandwich).unwrap() < 2.0);
        }
    }

    #[test]
    fn beta_and_alpha_fill_unit_row((m, n, alpha, seed) in arb_problem()) {
        let s = solve(generate_ab_alpha(m, n, alpha, seed).unwrap());
        let beta = s.bundle.beta();
        prop_assert!((beta.norm_squared() + s.solution.alpha.powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominance_predicate_is_sufficient((m, n, alpha, seed) in arb_problem()) {
        let s = solve(generate_ab_alpha(m, n, alpha, seed).unwrap());
        if let Some(d) = kappa2_dominance(&s.bundle, &s.solution) {
            if d.simple_condition {
                prop_assert!(d.predicate);
            }
            if d.predicate {
                prop_assert_eq!(d.observed, Some(true));
            }
        }
    }

    #[test]
    fn golub_chain_holds((m, n, alpha, seed) in arb_problem()) {
        let s = solve(generate_ab_alpha(m, n, alpha, seed).unwrap());
        match residual_diagnostics(&s.problem, &s.bundle, &s.solution).golub {
            GolubCheck::Evaluated { holds, .. } => prop_assert!(holds),
            GolubCheck::NotApplicable => prop_assert_eq!(s.solution.x.norm(), 0.0),
        }
    }
}
