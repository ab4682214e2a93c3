//! Empirical checks of the condition number: first-order predictions,
//! exact re-solves of perturbed problems, worst directions and Monte Carlo
//! sweeps.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cond_exact::{build_k_matrix, svd_condition, ExactFormulaWork};
use crate::error::{Result, TlsError};
use crate::generators::{gaussian_vector, rng_for};
use crate::linalg::thin_svd;
use crate::problem::TlsProblem;
use crate::report::{ReportDocument, ReportRow};
use crate::tls::{check_uniqueness, solve_tls, svd_bundle, TlsSolution};

/// A perturbed problem must keep at least this fraction of the base gap.
pub const GAP_PERSISTENCE: f64 = 1e-3;
/// Default step, relative to `‖[A b]‖_F`.
pub const DEFAULT_REL_STEP: f64 = 1e-8;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
/// Steps below this multiple of `‖[A b]‖_F` are never used in slope fits.
pub const ROUNDING_FLOOR: f64 = 1e-12;
/// Steps, relative to `‖[A b]‖_F`, of the convergence study inside
/// [`monte_carlo_validate`].
pub const CONVERGENCE_REL_STEPS: [f64; 4] = [1e-4, 1e-5, 1e-6, 1e-7];

const CONVERGENCE_STREAM: u64 = u64::MAX;

/// `(ΔA, Δb)` with `‖[ΔA Δb]‖_F = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDirection {
    pub delta_a: DMatrix<f64>,
    pub delta_b: DVector<f64>,
}

impl PerturbationDirection {
    /// Normalizes the pair to unit Frobenius norm.
    pub fn new(delta_a: DMatrix<f64>, delta_b: DVector<f64>) -> Result<Self> {
        if delta_a.nrows() != delta_b.len() {
            return Err(TlsError::Shape(format!(
                "ΔA has {} rows but Δb has {} entries",
                delta_a.nrows(),
                delta_b.len()
            )));
        }
        let norm = (delta_a.norm_squared() + delta_b.norm_squared()).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(TlsError::DegenerateVector(norm));
        }
        Ok(Self {
            delta_a: delta_a / norm,
            delta_b: delta_b / norm,
        })
    }

    /// Inverse of [`stacked`](Self::stacked).
    pub fn from_stacked(v: &DVector<f64>, m: usize, n: usize) -> Result<Self> {
        if v.len() != m * (n + 1) {
            return Err(TlsError::Shape(format!("expected {} entries, got {}", m * (n + 1), v.len())));
        }
        let delta_a = DMatrix::from_column_slice(m, n, &v.as_slice()[..m * n]);
        let delta_b = DVector::from_column_slice(&v.as_slice()[m * n..]);
        Self::new(delta_a, delta_b)
    }

    /// Unit perturbation of the single entry `A(i, j)`.
    pub fn unit_a(m: usize, n: usize, i: usize, j: usize) -> Self {
        let mut delta_a = DMatrix::zeros(m, n);
        delta_a[(i, j)] = 1.0;
        Self {
            delta_a,
            delta_b: DVector::zeros(m),
        }
    }

    /// Unit perturbation of `b(i)`.
    pub fn unit_b(m: usize, n: usize, i: usize) -> Self {
        let mut delta_b = DVector::zeros(m);
        delta_b[i] = 1.0;
        Self {
            delta_a: DMatrix::zeros(m, n),
            delta_b,
        }
    }

    /// Gaussian entries, normalized: uniform on the unit sphere.
    pub fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Self::from_stacked(&gaussian_vector(rng, m * (n + 1)), m, n)
    }

    /// `[vec(ΔA); Δb]`, columns of `ΔA` stacked.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.delta_a.len() + self.delta_b.len(),
            self.delta_a.iter().chain(self.delta_b.iter()).copied(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.delta_a.norm_squared() + self.delta_b.norm_squared()).sqrt()
    }
}

fn k_of(work: &ExactFormulaWork) -> Result<&DMatrix<f64>> {
    work.k_matrix()
        .ok_or_else(|| TlsError::InvalidArgument("K was not assembled; use build_k_matrix".into()))
}

/// `x + t K [vec(ΔA); Δb]`.
pub fn first_order_prediction(
    work: &ExactFormulaWork,
    solution: &TlsSolution,
    direction: &PerturbationDirection,
    t: f64,
) -> Result<DVector<f64>> {
    let k = k_of(work)?;
    Ok(&solution.x + (k * direction.stacked()) * t)
}

/// `‖K [vec(ΔA); Δb]‖`, the limit of the observed ratio as `t → 0`.
pub fn directional_derivative_norm(work: &ExactFormulaWork, direction: &PerturbationDirection) -> Result<f64> {
    Ok((k_of(work)? * direction.stacked()).norm())
}

/// Solves `(A + tΔA, b + tΔb)` from scratch and returns `‖x̃ − x‖ / t`.
pub fn perturbation_ratio(
    problem: &TlsProblem,
    solution: &TlsSolution,
    direction: &PerturbationDirection,
    t: f64,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(TlsError::InvalidArgument(format!("step must be positive, got {t}")));
    }
    let perturbed = problem.perturbed(&direction.delta_a, &direction.delta_b, t)?;
    let bundle = svd_bundle(&perturbed)?;
    let gap = check_uniqueness(&bundle);
    let needed = GAP_PERSISTENCE * solution.gap.rel_gap;
    if !gap.gap_ok || gap.rel_gap < needed {
        return Err(TlsError::PerturbationTooLarge(format!(
            "t = {t:e}: perturbed relative gap {:e} below {needed:e}",
            gap.rel_gap
        )));
    }
    let x_tilde = match solve_tls(&perturbed, &bundle) {
        Ok(s) => s.x,
        Err(TlsError::NoUniqueSolution { .. } | TlsError::DegenerateVector(_)) => {
            return Err(TlsError::PerturbationTooLarge(format!("t = {t:e}: perturbed problem not solvable")))
        }
        Err(e) => return Err(e),
    };
    Ok((x_tilde - &solution.x).norm() / t)
}

/// Reshaped top right singular vector of `K`, sign fixed so that its
/// largest-magnitude entry is positive.
pub fn worst_direction(work: &ExactFormulaWork) -> Result<PerturbationDirection> {
    let k = k_of(work)?;
    let n = k.nrows();
    let m = k.ncols() / (n + 1);
    // the thin SVD of Kᵀ keeps only n columns of the long factor
    let svd = thin_svd(&k.transpose())?;
    let mut v = svd.u.column(0).into_owned();
    let pivot = v.iamax();
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
    PerturbationDirection::from_stacked(&v, m, n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergencePoint {
    pub t: f64,
    pub ratio: f64,
    /// `|ratio − ‖K vec(Z)‖|`.
    pub remainder: f64,
    /// False when rounding error can dominate the remainder.
    pub clean: bool,
}

pub fn convergence_study(
    problem: &TlsProblem,
    solution: &TlsSolution,
    work: &ExactFormulaWork,
    direction: &PerturbationDirection,
    t_list: &[f64],
) -> Result<Vec<ConvergencePoint>> {
    let limit = directional_derivative_norm(work, direction)?;
    let scale = problem.augmented_norm();
    let kappa = svd_condition(work, problem, solution)?.kappa_abs;
    t_list
        .iter()
        .map(|&t| {
            let ratio = perturbation_ratio(problem, solution, direction, t)?;
            let remainder = (ratio - limit).abs();
            let noise = 100.0 * f64::EPSILON * kappa.max(1.0) * scale.max(1.0) / t;
            Ok(ConvergencePoint {
                t,
                ratio,
                remainder,
                clean: t >= ROUNDING_FLOOR * scale && remainder > noise,
            })
        })
        .collect()
}

/// Least-squares slope of `log(remainder)` against `log(t)` over the clean
/// points; `None` with fewer than two.
pub fn fit_slope(points: &[ConvergencePoint]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.clean && p.remainder > 0.0)
        .map(|p| (p.t.ln(), p.remainder.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub kappa_reference: f64,
    /// `None` when no random trials were run.
    pub max_observed_ratio: Option<f64>,
    pub worst_direction_ratio: f64,
    pub trials: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Per-trial ratios in trial order.
    pub ratios: Vec<f64>,
    pub convergence: Vec<ConvergencePoint>,
    pub convergence_slope: Option<f64>,
}

impl ValidationSummary {
    /// `max ratio ≤ κ(1 + tol)`.
    pub fn sound(&self) -> bool {
        self.max_observed_ratio
            .is_none_or(|r| r <= self.kappa_reference * (1.0 + self.tolerance))
    }

    /// `worst-direction ratio ≥ κ(1 − tol)`.
    pub fn attained(&self) -> bool {
        self.worst_direction_ratio >= self.kappa_reference * (1.0 - self.tolerance)
    }

    pub fn to_report(&self, label: &str) -> ReportDocument {
        let mut doc = ReportDocument::new();
        doc.set_meta("trials", self.trials);
        doc.set_meta("step", self.step);
        doc.set_meta("tolerance", self.tolerance);
        doc.rows.push(
            ReportRow::new(label)
                .with("kappa", Some(self.kappa_reference))
                .with("max_ratio", self.max_observed_ratio)
                .with("worst_ratio", Some(self.worst_direction_ratio))
                .with("max_ratio_over_kappa", self.max_observed_ratio.map(|r| r / self.kappa_reference))
                .with("worst_ratio_over_kappa", Some(self.worst_direction_ratio / self.kappa_reference))
                .with("sound", Some(f64::from(u8::from(self.sound()))))
                .with("attained", Some(f64::from(u8::from(self.attained()))))
                .with("convergence_slope", self.convergence_slope),
        );
        doc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub trials: usize,
    /// Absolute step; `None` means `1e-8 ‖[A b]‖_F`.
    pub step: Option<f64>,
    pub seed: u64,
    pub tolerance: f64,
}

impl ValidationConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            step: None,
            seed,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Random-direction sweep plus worst-direction attainment and a
/// convergence study along one more random direction. Trial `i` draws from
/// stream `i` of `seed`, so results do not depend on scheduling.
pub fn monte_carlo_validate(problem: &TlsProblem, config: &ValidationConfig) -> Result<ValidationSummary> {
    let bundle = svd_bundle(problem)?;
    let solution = solve_tls(problem, &bundle)?;
    let work = build_k_matrix(problem, &bundle, &solution)?;
    let kappa = svd_condition(&work, problem, &solution)?.kappa_abs;
    let scale = problem.augmented_norm();
    let step = config.step.unwrap_or(DEFAULT_REL_STEP * scale);
    let (m, n) = (problem.rows(), problem.cols());

    let ratios: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let dir = PerturbationDirection::random(m, n, &mut rng_for(config.seed, i as u64))?;
            perturbation_ratio(problem, &solution, &dir, step)
        })
        .collect::<Result<_>>()?;
    let max_observed_ratio = ratios.iter().copied().reduce(f64::max);

    let worst = worst_direction(&work)?;
    let worst_direction_ratio = perturbation_ratio(problem, &solution, &worst, step)?;

    let probe = PerturbationDirection::random(m, n, &mut rng_for(config.seed, CONVERGENCE_STREAM))?;
    let t_list: Vec<f64> = CONVERGENCE_REL_STEPS.iter().map(|r| r * scale).collect();
    let convergence = convergence_study(problem, &solution, &work, &probe, &t_list)?;
    let convergence_slope = fit_slope(&convergence);

    Ok(ValidationSummary {
        kappa_reference: kappa,
        max_observed_ratio,
        worst_direction_ratio,
        trials: config.trials,
        step,
        tolerance: config.tolerance,
        ratios,
        convergence,
        convergence_slope,
    })
}
