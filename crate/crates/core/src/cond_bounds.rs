//! Cheap lower/upper bounds on the TLS condition number.
//!
//! Every family is evaluated from the two SVDs already held in an
//! [`SvdBundle`]; none of them needs `K`. The gap `σ̂ₙ² − σ²_{n+1}` is taken
//! from [`GapDiagnostics::gap_sq`], which is computed without cancellation.
//!
//! [`GapDiagnostics::gap_sq`]: crate::tls::GapDiagnostics

use std::fmt;

use nalgebra::DVector;

use crate::cond_exact::{relative_scale, svd_condition, ExactFormulaWork};
use crate::error::{Result, TlsError};
use crate::problem::TlsProblem;
use crate::tls::{check_uniqueness, SvdBundle, TlsSolution};

/// Relative slack for enclosure verdicts.
pub const VERDICT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFamily {
    SimpleSandwich,
    SharpSandwich,
    Kappa1,
    Kappa2Lower,
    Kappa2Upper,
    Bhm,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 6] = [
        BoundFamily::SimpleSandwich,
        BoundFamily::SharpSandwich,
        BoundFamily::Kappa1,
        BoundFamily::Kappa2Lower,
        BoundFamily::Kappa2Upper,
        BoundFamily::Bhm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundFamily::SimpleSandwich => "simple_sandwich",
            BoundFamily::SharpSandwich => "sharp_sandwich",
            BoundFamily::Kappa1 => "kappa1",
            BoundFamily::Kappa2Lower => "kappa2_lower",
            BoundFamily::Kappa2Upper => "kappa2_upper",
            BoundFamily::Bhm => "bhm",
        }
    }

    /// BHM is a point estimate and is never judged as an enclosure.
    pub fn is_certified(self) -> bool {
        self != BoundFamily::Bhm
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    pub family: BoundFamily,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub applicability_note: String,
}

impl BoundPair {
    fn new(family: BoundFamily, lower: Option<f64>, upper: Option<f64>, note: impl Into<String>) -> Self {
        Self {
            family,
            lower,
            upper,
            applicability_note: note.into(),
        }
    }

    pub fn not_applicable(family: BoundFamily, note: impl Into<String>) -> Self {
        Self::new(family, None, None, note)
    }

    /// `lower ≤ κ(1+tol)` and `κ ≤ upper(1+tol)` for whichever ends exist.
    /// `None` for BHM or when neither end is present.
    pub fn encloses(&self, kappa: f64, tol: f64) -> Option<bool> {
        if !self.family.is_certified() || (self.lower.is_none() && self.upper.is_none()) {
            return None;
        }
        let lower_ok = self.lower.is_none_or(|l| l <= kappa * (1.0 + tol));
        let upper_ok = self.upper.is_none_or(|u| kappa <= u * (1.0 + tol));
        Some(lower_ok && upper_ok)
    }

    /// `upper / lower` when both ends exist.
    pub fn sharpness(&self) -> Option<f64> {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if l > 0.0 => Some(u / l),
            _ => None,
        }
    }

    fn scaled(&self, factor: Option<f64>) -> Self {
        Self {
            lower: self.lower.zip(factor).map(|(v, c)| v * c),
            upper: self.upper.zip(factor).map(|(v, c)| v * c),
            ..self.clone()
        }
    }
}

/// `α⁻¹ sₙ ≤ κ ≤ α⁻² sₙ`.
pub fn simple_sandwich(solution: &TlsSolution, work: &ExactFormulaWork) -> BoundPair {
    let inv_alpha = solution.inv_alpha();
    let s_n = work.s_diag[work.s_diag.len() - 1];
    BoundPair::new(
        BoundFamily::SimpleSandwich,
        Some(inv_alpha * s_n),
        Some(inv_alpha * inv_alpha * s_n),
        "",
    )
}

/// Sandwich built from the last row `[β₁ … βₙ −α]` of `V`:
///
/// `κ̄ = α⁻² √(Σβᵢ²sᵢ²)/√(1−α²) + α⁻¹sₙ`,
/// `κ̲ = ½(α⁻² √(Σβᵢ²sᵢ²)/√(1−α²) + α⁻¹sₙ √(1−α²−βₙ²)/√(1−α²))`.
///
/// `√(1−α²)` is taken as `‖β‖` and `1−α²−βₙ²` as `Σ_{i<n} βᵢ²`, which
/// avoids cancellation when `α` is close to 1. For `x = 0` both ends equal
/// `sₙ`.
pub fn sharp_sandwich(solution: &TlsSolution, bundle: &SvdBundle, work: &ExactFormulaWork) -> BoundPair {
    let n = work.s_diag.len();
    let s_n = work.s_diag[n - 1];
    let beta = bundle.beta();
    let beta_norm = beta.norm();
    if beta_norm == 0.0 || solution.x.norm() == 0.0 {
        return BoundPair::new(BoundFamily::SharpSandwich, Some(s_n), Some(s_n), "x = 0: exact value sₙ");
    }
    let inv_alpha = solution.inv_alpha();
    let weighted = beta.component_mul(&work.s_diag).norm();
    let head = inv_alpha * inv_alpha * weighted / beta_norm;
    let rest = beta.rows(0, n - 1).norm();
    let lower = 0.5 * (head + inv_alpha * s_n * rest / beta_norm);
    let upper = head + inv_alpha * s_n;
    let note = if solution.alpha <= 0.5 {
        "α ≤ 1/2: upper/lower < 4 guaranteed"
    } else {
        ""
    };
    BoundPair::new(BoundFamily::SharpSandwich, Some(lower), Some(upper), note)
}

fn sq_minus(a: f64, b: f64) -> f64 {
    (a - b) * (a + b)
}

/// `κ̲₁ = α⁻¹ √(σ̂²ₙ₋₁+σ²)/(σ̂²ₙ₋₁−σ²)`, `κ̄₁ = α⁻¹ √(σ̂²ₙ+σ²)/(σ̂²ₙ−σ²)`,
/// with `σ = σ_{n+1}`. The lower end needs `n ≥ 2`.
pub fn sv_bounds_kappa1(bundle: &SvdBundle, solution: &TlsSolution) -> BoundPair {
    let n = bundle.n();
    let sigma = bundle.sigma_last();
    let inv_alpha = solution.inv_alpha();
    let hat_n = bundle.sigma_hat[n - 1];
    let upper = inv_alpha * hat_n.hypot(sigma) / solution.gap.gap_sq;
    let (lower, note) = if n >= 2 {
        let hat = bundle.sigma_hat[n - 2];
        (Some(inv_alpha * hat.hypot(sigma) / sq_minus(hat, sigma)), "")
    } else {
        (None, "lower needs n ≥ 2")
    };
    BoundPair::new(BoundFamily::Kappa1, lower, Some(upper), note)
}

/// `κ̲₂ = α⁻¹ / √(σ̂ₙ² − σ²_{n+1})`.
pub fn lower_kappa2(_bundle: &SvdBundle, solution: &TlsSolution) -> BoundPair {
    let lower = solution.inv_alpha() / solution.gap.gap_sq.sqrt();
    BoundPair::new(BoundFamily::Kappa2Lower, Some(lower), None, "lower bound only")
}

/// Conditions under which `κ̲₁ ≤ κ̲₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa2Dominance {
    /// `σ̂ₙ₋₁ ≥ σ_{n+1} + √(σ̂ₙ² − σ²_{n+1})`.
    pub predicate: bool,
    /// `σ̂ₙ₋₁ ≥ 2σ̂ₙ`, which implies the predicate.
    pub simple_condition: bool,
    /// `κ̲₁ ≤ κ̲₂` evaluated directly, when `κ̲₁` exists.
    pub observed: Option<bool>,
}

pub fn kappa2_dominance(bundle: &SvdBundle, solution: &TlsSolution) -> Option<Kappa2Dominance> {
    let n = bundle.n();
    if n < 2 {
        return None;
    }
    let hat_prev = bundle.sigma_hat[n - 2];
    let hat_n = bundle.sigma_hat[n - 1];
    let k1 = sv_bounds_kappa1(bundle, solution).lower;
    let k2 = lower_kappa2(bundle, solution).lower;
    Some(Kappa2Dominance {
        predicate: hat_prev >= bundle.sigma_last() + solution.gap.gap_sq.sqrt(),
        simple_condition: hat_prev >= 2.0 * hat_n,
        observed: k1.zip(k2).map(|(a, b)| a <= b * (1.0 + VERDICT_TOL)),
    })
}

/// `√((1+31ρ²)/(1−ρ²))` with `ρ = σ_{n+1}/σₙ`.
pub fn kappa2_factor(rho: f64) -> f64 {
    ((1.0 + 31.0 * rho * rho) / ((1.0 - rho) * (1.0 + rho))).sqrt()
}

/// `κ̲₂ ≤ κ ≤ κ̄₂ = √((1+31ρ²)/(1−ρ²)) κ̲₂`, valid for `α ≤ 1/2`.
pub fn upper_kappa2(bundle: &SvdBundle, solution: &TlsSolution) -> Result<BoundPair> {
    if solution.alpha > 0.5 {
        return Err(TlsError::NotApplicable(format!(
            "κ̄₂ needs α ≤ 1/2, got α = {:.6}",
            solution.alpha
        )));
    }
    let lower = lower_kappa2(bundle, solution).lower.unwrap_or(f64::NAN);
    let rho = rho(bundle);
    Ok(BoundPair::new(
        BoundFamily::Kappa2Upper,
        Some(lower),
        Some(kappa2_factor(rho) * lower),
        "",
    ))
}

/// `σ̂₁ / (σ̂ₙ − σ_{n+1})`, a heuristic without any bound guarantee.
pub fn bhm_approx(bundle: &SvdBundle) -> BoundPair {
    let gap = check_uniqueness(bundle);
    let note = "heuristic, no bound guarantee";
    if !gap.gap_ok || gap.gap <= 0.0 {
        return BoundPair::not_applicable(BoundFamily::Bhm, "no genericity gap");
    }
    BoundPair::new(BoundFamily::Bhm, None, Some(bundle.sigma_hat[0] / gap.gap), note)
}

pub fn rho(bundle: &SvdBundle) -> f64 {
    bundle.sigma_last() / bundle.sigma[bundle.n() - 1]
}

/// `κ̄₁` against the two coarser upper bounds it improves on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperChain {
    pub kappa1_upper: f64,
    /// `α⁻¹ √(σ̂₁²+σ²)/(σ̂ₙ²−σ²)`.
    pub via_sigma_hat_1: f64,
    /// `α⁻¹ √(σ₁²+σ²)/(σ̂ₙ²−σ²)`.
    pub via_sigma_1: f64,
}

impl UpperChain {
    pub fn holds(&self) -> bool {
        let slack = 1.0 + 1e-12;
        self.kappa1_upper <= self.via_sigma_hat_1 * slack && self.via_sigma_hat_1 <= self.via_sigma_1 * slack
    }
}

pub fn upper_chain(bundle: &SvdBundle, solution: &TlsSolution) -> UpperChain {
    let sigma = bundle.sigma_last();
    let scale = solution.inv_alpha() / solution.gap.gap_sq;
    UpperChain {
        kappa1_upper: sv_bounds_kappa1(bundle, solution).upper.unwrap_or(f64::NAN),
        via_sigma_hat_1: scale * bundle.sigma_hat[0].hypot(sigma),
        via_sigma_1: scale * bundle.sigma[0].hypot(sigma),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub kappa_reference: f64,
    pub kappa_reference_rel: Option<f64>,
    /// Absolute bounds, one per family in [`BoundFamily::ALL`] order.
    pub pairs: Vec<BoundPair>,
    /// The same bounds scaled by `‖[A b]‖_F/‖x‖`; BHM is scale-free and
    /// copied unchanged.
    pub relative_pairs: Vec<BoundPair>,
    pub beta: DVector<f64>,
    pub alpha: f64,
    pub rho: f64,
    pub sandwich_verdicts: Vec<(BoundFamily, Option<bool>)>,
    pub sharpness_ratios: Vec<(BoundFamily, Option<f64>)>,
    pub dominance: Option<Kappa2Dominance>,
    pub upper_chain: UpperChain,
    /// Some certified pair is within a factor 4 (`x ≠ 0` only).
    pub factor_four: Option<bool>,
}

impl BoundsReport {
    pub fn pair(&self, family: BoundFamily) -> &BoundPair {
        self.pairs.iter().find(|p| p.family == family).expect("every family is present")
    }

    pub fn relative_pair(&self, family: BoundFamily) -> &BoundPair {
        self.relative_pairs
            .iter()
            .find(|p| p.family == family)
            .expect("every family is present")
    }

    pub fn verdict(&self, family: BoundFamily) -> Option<bool> {
        self.sandwich_verdicts.iter().find(|(f, _)| *f == family).and_then(|(_, v)| *v)
    }

    pub fn sharpness(&self, family: BoundFamily) -> Option<f64> {
        self.sharpness_ratios.iter().find(|(f, _)| *f == family).and_then(|(_, v)| *v)
    }

    /// Families whose enclosure verdict failed.
    pub fn violations(&self) -> Vec<BoundFamily> {
        self.sandwich_verdicts
            .iter()
            .filter(|(_, v)| *v == Some(false))
            .map(|(f, _)| *f)
            .collect()
    }

    pub fn all_hold(&self) -> bool {
        self.violations().is_empty()
    }

    /// Fails with `BoundViolation` naming every violated family.
    pub fn ensure_sound(&self) -> Result<()> {
        let bad = self.violations();
        if bad.is_empty() {
            return Ok(());
        }
        let detail: Vec<String> = bad
            .iter()
            .map(|f| {
                let p = self.pair(*f);
                format!("{f}: lower={:?} κ={:e} upper={:?}", p.lower, self.kappa_reference, p.upper)
            })
            .collect();
        Err(TlsError::BoundViolation(detail.join("; ")))
    }
}

pub fn bounds_report(
    problem: &TlsProblem,
    bundle: &SvdBundle,
    solution: &TlsSolution,
    work: &ExactFormulaWork,
) -> Result<BoundsReport> {
    let reference = svd_condition(work, problem, solution)?;
    let kappa = reference.kappa_abs;

    let kappa2_upper = upper_kappa2(bundle, solution)
        .unwrap_or_else(|e| BoundPair::not_applicable(BoundFamily::Kappa2Upper, e.to_string()));
    let pairs = vec![
        simple_sandwich(solution, work),
        sharp_sandwich(solution, bundle, work),
        sv_bounds_kappa1(bundle, solution),
        lower_kappa2(bundle, solution),
        kappa2_upper,
        bhm_approx(bundle),
    ];

    let scale = relative_scale(problem.augmented_norm(), solution);
    let relative_pairs = pairs
        .iter()
        .map(|p| match p.family {
            BoundFamily::Bhm => p.scaled(scale.map(|_| 1.0)),
            _ => p.scaled(scale),
        })
        .collect();

    let sandwich_verdicts = pairs.iter().map(|p| (p.family, p.encloses(kappa, VERDICT_TOL))).collect();
    let sharpness_ratios: Vec<_> = pairs
        .iter()
        .map(|p| (p.family, if p.family.is_certified() { p.sharpness() } else { None }))
        .collect();

    let factor_four = (solution.x.norm() > 0.0).then(|| {
        sharpness_ratios
            .iter()
            .filter(|(f, _)| matches!(f, BoundFamily::SimpleSandwich | BoundFamily::SharpSandwich))
            .any(|(_, r)| r.is_some_and(|r| r < 4.0))
    });

    Ok(BoundsReport {
        kappa_reference: kappa,
        kappa_reference_rel: reference.kappa_rel,
        pairs,
        relative_pairs,
        beta: bundle.beta(),
        alpha: solution.alpha,
        rho: rho(bundle),
        sandwich_verdicts,
        sharpness_ratios,
        dominance: kappa2_dominance(bundle, solution),
        upper_chain: upper_chain(bundle, solution),
        factor_four,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tls::{solve_tls, svd_bundle};
    use nalgebra::DMatrix;

    fn fixture(a: &[f64], b: &[f64]) -> (TlsProblem, SvdBundle, TlsSolution, ExactFormulaWork) {
        let p = TlsProblem::new(
            DMatrix::from_column_slice(b.len(), a.len() / b.len(), a),
            DVector::from_column_slice(b),
            "t",
        )
        .unwrap();
        let bundle = svd_bundle(&p).unwrap();
        let sol = solve_tls(&p, &bundle).unwrap();
        let work = ExactFormulaWork::compact(&p, &bundle, &sol).unwrap();
        (p, bundle, sol, work)
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn diagonal_fixture() {
        let (p, bundle, sol, work) = fixture(&[2.0, 0.0], &[0.0, 1.0]);
        let kappa = 5f64.sqrt() / 3.0;
        let simple = simple_sandwich(&sol, &work);
        assert!(close(simple.lower.unwrap(), kappa, 1e-14) && close(simple.upper.unwrap(), kappa, 1e-14));
        let sharp = sharp_sandwich(&sol, &bundle, &work);
        assert_eq!(sharp.lower, sharp.upper);
        assert!(close(sharp.lower.unwrap(), kappa, 1e-14));
        let k1 = sv_bounds_kappa1(&bundle, &sol);
        assert!(k1.lower.is_none());
        assert!(close(k1.upper.unwrap(), kappa, 1e-14));
        assert!(close(lower_kappa2(&bundle, &sol).lower.unwrap(), 1.0 / 3f64.sqrt(), 1e-14));
        assert!(close(bhm_approx(&bundle).upper.unwrap(), 2.0, 1e-14));

        let report = bounds_report(&p, &bundle, &sol, &work).unwrap();
        assert!(report.relative_pairs.iter().all(|p| p.lower.is_none() && p.upper.is_none()));
        assert!(report.all_hold());
        assert_eq!(report.factor_four, None);
    }

    #[test]
    fn golden_ratio_fixture() {
        let (p, bundle, sol, work) = fixture(&[1.0, 0.0], &[1.0, 1.0]);
        let alpha = sol.alpha;
        let s1 = (3.0f64 / 5.0).sqrt();
        let simple = simple_sandwich(&sol, &work);
        assert!(close(simple.lower.unwrap(), s1 / alpha, 1e-12));
        assert!(close(simple.upper.unwrap(), s1 / alpha / alpha, 1e-12));
        assert!((simple.lower.unwrap() - 1.4734).abs() < 1e-4);

        let sharp = sharp_sandwich(&sol, &bundle, &work);
        assert!(close(sharp.lower.unwrap(), 0.5 * s1 / alpha / alpha, 1e-12));
        assert!(close(sharp.upper.unwrap(), s1 / alpha / alpha + s1 / alpha, 1e-12));
        assert!((sharp.upper.unwrap() - 4.2759).abs() < 1e-4);

        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let inv_alpha = (1.0 + phi * phi).sqrt();
        assert!(close(sv_bounds_kappa1(&bundle, &sol).upper.unwrap(), 5f64.sqrt() * phi, 1e-12));
        assert!(close(
            lower_kappa2(&bundle, &sol).lower.unwrap(),
            inv_alpha / (1.0 - 1.0 / (phi * phi)).sqrt(),
            1e-12
        ));
        assert!(close(bhm_approx(&bundle).upper.unwrap(), phi * phi, 1e-12));
        assert!(matches!(upper_kappa2(&bundle, &sol), Err(TlsError::NotApplicable(_))));

        let report = bounds_report(&p, &bundle, &sol, &work).unwrap();
        for f in [
            BoundFamily::SimpleSandwich,
            BoundFamily::SharpSandwich,
            BoundFamily::Kappa1,
            BoundFamily::Kappa2Lower,
        ] {
            assert_eq!(report.verdict(f), Some(true), "{f}");
        }
        assert_eq!(report.verdict(BoundFamily::Kappa2Upper), None);
        assert_eq!(report.verdict(BoundFamily::Bhm), None);
        assert!(report.upper_chain.holds());
        assert_eq!(report.factor_four, Some(true));
        assert!((report.beta.norm_squared() + alpha * alpha - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa2_factor_values() {
        assert!((kappa2_factor(0.953) - 17.822).abs() < 1e-3);
        assert_eq!(kappa2_factor(0.0), 1.0);
    }

    #[test]
    fn enclosure_logic() {
        let p = BoundPair::new(BoundFamily::Kappa1, Some(1.0), Some(2.0), "");
        assert_eq!(p.encloses(1.5, 0.0), Some(true));
        assert_eq!(p.encloses(2.5, 0.0), Some(false));
        assert_eq!(p.encloses(0.5, 0.0), Some(false));
        assert_eq!(p.sharpness(), Some(2.0));
        let b = BoundPair::new(BoundFamily::Bhm, None, Some(1.0), "");
        assert_eq!(b.encloses(5.0, 0.0), None);
    }
}
