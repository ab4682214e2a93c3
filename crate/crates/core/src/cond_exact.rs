//! Exact absolute and relative condition numbers of the TLS solution.
//!
//! Four independent formulas are provided:
//!
//! * [`kron_condition`]: spectral norm of the explicit first-order map `K`,
//! * [`cholesky_condition`]: `√(1+‖x‖²) ‖P⁻¹L‖` with `C = LLᵀ`,
//! * [`svd_condition`]: `√(1+‖x‖²) ‖V₁₁⁻ᵀ S‖`, using only the SVD of `[A b]`,
//! * [`baboulin_condition`]: `√(1+‖x‖²) ‖D̂ V̂ᵀ V₁₁ D‖`, using both SVDs.
//!
//! `svd_condition` is the reference value everywhere else in the crate; it
//! is the only one that stays accurate when `σ̂ₙ` and `σ_{n+1}` nearly
//! coincide.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TlsError};
use crate::linalg::{lu_solve, singular_values, spectral_norm};
use crate::problem::TlsProblem;
use crate::tls::{SvdBundle, TlsSolution};

/// Below this relative gap the `P`-based and `D̂`-based formulas refuse to run.
pub const HARD_GAP_THRESHOLD: f64 = 1e-6;
/// Below this relative gap they run but attach a warning.
pub const WARN_GAP_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Kronecker,
    Cholesky,
    Svd,
    Baboulin,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Kronecker, Method::Cholesky, Method::Svd, Method::Baboulin];

    pub fn name(self) -> &'static str {
        match self {
            Method::Kronecker => "kron",
            Method::Cholesky => "cholesky",
            Method::Svd => "svd",
            Method::Baboulin => "baboulin",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = TlsError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("kronecker") && *m == Method::Kronecker))
            .ok_or_else(|| TlsError::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// `K` and `G(x)`; only built on request because `K` is `n × m(n+1)`.
#[derive(Debug, Clone)]
pub struct KroneckerBlocks {
    pub k_matrix: DMatrix<f64>,
    pub g_of_x: DMatrix<f64>,
}

/// Intermediate matrices shared by the exact formulas and the bounds.
#[derive(Debug, Clone)]
pub struct ExactFormulaWork {
    pub kron: Option<KroneckerBlocks>,
    /// `P = AᵀA − σ²_{n+1} I`.
    pub p_matrix: DMatrix<f64>,
    /// `C = AᵀA + σ²_{n+1} I − 2σ²_{n+1} xxᵀ/(1+‖x‖²)`.
    pub c_matrix: DMatrix<f64>,
    /// Cholesky factor of `C`; `None` when the factorization broke down.
    pub l_factor: Option<DMatrix<f64>>,
    pub v11: DMatrix<f64>,
    /// `V₁₁⁻ᵀ` from the orthogonality of `V`; `None` when `α = 0`.
    pub v11_inv_t: Option<DMatrix<f64>>,
    /// `sᵢ = √(σᵢ² + σ²_{n+1}) / (σᵢ² − σ²_{n+1})`.
    pub s_diag: DVector<f64>,
    /// `1 / (σ̂ᵢ² − σ²_{n+1})`.
    pub d_hat: DVector<f64>,
    /// `√(σᵢ² + σ²_{n+1})`.
    pub d_b: DVector<f64>,
    /// `σᵢ² − σ²_{n+1}`.
    pub lambda_diag: DVector<f64>,
}

impl ExactFormulaWork {
    /// Everything except `K`: cheap enough for large problems.
    pub fn compact(problem: &TlsProblem, bundle: &SvdBundle, solution: &TlsSolution) -> Result<Self> {
        let a = problem.a();
        let n = problem.cols();
        let sigma_last = bundle.sigma_last();
        let sigma2 = sigma_last * sigma_last;
        let x = &solution.x;

        let ata = a.transpose() * a;
        let eye = DMatrix::<f64>::identity(n, n);
        let p_matrix = &ata - &eye * sigma2;
        let c_matrix = &ata + &eye * sigma2 - (x * x.transpose()) * (2.0 * sigma2 / (1.0 + x.norm_squared()));
        let l_factor = c_matrix.clone().cholesky().map(|c| c.l());

        let lambda_diag = bundle.lambda();
        let d_b = DVector::from_iterator(n, bundle.sigma.iter().take(n).map(|s| (s * s + sigma2).sqrt()));
        let s_diag = d_b.component_div(&lambda_diag);
        let d_hat = DVector::from_iterator(
            n,
            bundle
                .sigma_hat
                .iter()
                .map(|&s| 1.0 / ((s - sigma_last) * (s + sigma_last))),
        );

        Ok(Self {
            kron: None,
            p_matrix,
            c_matrix,
            l_factor,
            v11: bundle.v11(),
            v11_inv_t: bundle.v11_inv_t(),
            s_diag,
            d_hat,
            d_b,
            lambda_diag,
        })
    }

    pub fn k_matrix(&self) -> Option<&DMatrix<f64>> {
        self.kron.as_ref().map(|k| &k.k_matrix)
    }
}

/// `G(x) = [xᵀ −1] ⊗ I_m`.
pub fn g_matrix(x: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = x.len();
    let mut g = DMatrix::zeros(m, m * (n + 1));
    for j in 0..=n {
        let coeff = if j < n { x[j] } else { -1.0 };
        for i in 0..m {
            g[(i, j * m + i)] = coeff;
        }
    }
    g
}

/// Build all working matrices including the explicit first-order map
///
/// `K = P⁻¹ (2Aᵀ r̂ r̂ᵀ G(x) − Aᵀ G(x) − [Iₙ ⊗ rᵀ  O])`, `r̂ = r/‖r‖`.
///
/// Columns follow `[vec(ΔA); Δb]` with `vec` stacking the columns of `ΔA`:
/// column `j·m + i` is `ΔA(i, j)` and column `n·m + i` is `Δb(i)`.
pub fn build_k_matrix(problem: &TlsProblem, bundle: &SvdBundle, solution: &TlsSolution) -> Result<ExactFormulaWork> {
    let mut work = ExactFormulaWork::compact(problem, bundle, solution)?;
    let (m, n) = (problem.rows(), problem.cols());
    let r = &solution.r;
    let r_norm = r.norm();
    if r_norm == 0.0 {
        return Err(TlsError::TrivialProblem);
    }
    let r_hat = r / r_norm;
    let a = problem.a();
    let x = &solution.x;

    let g = g_matrix(x, m);
    let at_rhat = a.transpose() * &r_hat;
    let mut rhs = (&at_rhat * 2.0) * (r_hat.transpose() * &g) - a.transpose() * &g;
    for k in 0..n {
        for i in 0..m {
            rhs[(k, k * m + i)] -= r[i];
        }
    }

    let k_matrix = lu_solve(&work.p_matrix, &rhs)
        .ok_or_else(|| TlsError::Factorization("P = AᵀA − σ²I is singular".into()))?;
    work.kron = Some(KroneckerBlocks { k_matrix, g_of_x: g });
    Ok(work)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEstimate {
    pub kappa_abs: f64,
    /// `κ ‖[A b]‖_F / ‖x‖`; `None` when `x = 0`.
    pub kappa_rel: Option<f64>,
    pub method: Method,
    pub warnings: Vec<String>,
}

impl ConditionEstimate {
    fn new(kappa_abs: f64, problem_norm: f64, solution: &TlsSolution, method: Method, warnings: Vec<String>) -> Result<Self> {
        if !(kappa_abs.is_finite() && kappa_abs > 0.0) {
            return Err(TlsError::Factorization(format!("{method} formula produced κ = {kappa_abs}")));
        }
        Ok(Self {
            kappa_abs,
            kappa_rel: relative_scale(problem_norm, solution).map(|s| kappa_abs * s),
            method,
            warnings,
        })
    }
}

/// `‖[A b]‖_F / ‖x‖`, or `None` for `x = 0`.
pub fn relative_scale(problem_norm: f64, solution: &TlsSolution) -> Option<f64> {
    let x_norm = solution.x.norm();
    (x_norm > 0.0).then(|| problem_norm / x_norm)
}

fn gap_guard(solution: &TlsSolution, method: Method) -> Result<Vec<String>> {
    let rel_gap = solution.gap.rel_gap;
    if rel_gap < HARD_GAP_THRESHOLD {
        return Err(TlsError::IllConditionedGap {
            rel_gap,
            threshold: HARD_GAP_THRESHOLD,
        });
    }
    let mut warnings = Vec::new();
    if rel_gap < WARN_GAP_THRESHOLD {
        warnings.push(format!(
            "{method}: relative gap {rel_gap:.3e} below {WARN_GAP_THRESHOLD:e}, result may be inaccurate"
        ));
    }
    Ok(warnings)
}

/// `κ = ‖K‖`.
pub fn kron_condition(work: &ExactFormulaWork, problem: &TlsProblem, solution: &TlsSolution) -> Result<ConditionEstimate> {
    let k = work
        .k_matrix()
        .ok_or_else(|| TlsError::InvalidArgument("K was not assembled; use build_k_matrix".into()))?;
    let kappa = spectral_norm(k)?;
    let mut warnings = Vec::new();
    if solution.gap.rel_gap < WARN_GAP_THRESHOLD {
        warnings.push(format!(
            "kron: relative gap {:.3e} below {WARN_GAP_THRESHOLD:e}, P is nearly singular",
            solution.gap.rel_gap
        ));
    }
    ConditionEstimate::new(kappa, problem.augmented_norm(), solution, Method::Kronecker, warnings)
}

/// `κ = √(1+‖x‖²) ‖P⁻¹ L‖`, solving against the Cholesky factor of `P`.
pub fn cholesky_condition(
    work: &ExactFormulaWork,
    problem: &TlsProblem,
    _bundle: &SvdBundle,
    solution: &TlsSolution,
) -> Result<ConditionEstimate> {
    let warnings = gap_guard(solution, Method::Cholesky)?;
    let l = work
        .l_factor
        .as_ref()
        .ok_or_else(|| TlsError::Factorization("C is not numerically positive definite".into()))?;
    let p_chol = work
        .p_matrix
        .clone()
        .cholesky()
        .ok_or_else(|| TlsError::Factorization("P is not numerically positive definite".into()))?;
    let y = p_chol.solve(l);
    let kappa = solution.inv_alpha() * spectral_norm(&y)?;
    ConditionEstimate::new(kappa, problem.augmented_norm(), solution, Method::Cholesky, warnings)
}

/// `κ = √(1+‖x‖²) ‖V₁₁⁻ᵀ S‖`.
pub fn svd_condition(work: &ExactFormulaWork, problem: &TlsProblem, solution: &TlsSolution) -> Result<ConditionEstimate> {
    let inv_t = work.v11_inv_t.as_ref().ok_or(TlsError::SingularBlock)?;
    let y = inv_t * DMatrix::from_diagonal(&work.s_diag);
    let kappa = solution.inv_alpha() * spectral_norm(&y)?;
    ConditionEstimate::new(kappa, problem.augmented_norm(), solution, Method::Svd, Vec::new())
}

/// `κ = √(1+‖x‖²) ‖D̂ [V̂ᵀ O] V [D O]ᵀ‖ = √(1+‖x‖²) ‖D̂ V̂ᵀ V₁₁ D‖`.
pub fn baboulin_condition(
    work: &ExactFormulaWork,
    problem: &TlsProblem,
    bundle: &SvdBundle,
    solution: &TlsSolution,
) -> Result<ConditionEstimate> {
    let warnings = gap_guard(solution, Method::Baboulin)?;
    if work.d_hat.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(TlsError::Factorization("σ̂ᵢ² − σ²_{n+1} is not positive".into()));
    }
    let middle = bundle.v_hat.transpose() * &work.v11;
    let scaled = DMatrix::from_diagonal(&work.d_hat) * middle * DMatrix::from_diagonal(&work.d_b);
    let kappa = solution.inv_alpha() * spectral_norm(&scaled)?;
    ConditionEstimate::new(kappa, problem.augmented_norm(), solution, Method::Baboulin, warnings)
}

pub fn condition(
    method: Method,
    work: &ExactFormulaWork,
    problem: &TlsProblem,
    bundle: &SvdBundle,
    solution: &TlsSolution,
) -> Result<ConditionEstimate> {
    match method {
        Method::Kronecker => kron_condition(work, problem, solution),
        Method::Cholesky => cholesky_condition(work, problem, bundle, solution),
        Method::Svd => svd_condition(work, problem, solution),
        Method::Baboulin => baboulin_condition(work, problem, bundle, solution),
    }
}

/// Spectrum of `V₁₁`, which is `(1, …, 1, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct V11Analysis {
    pub singular_values: DVector<f64>,
    /// `σ₁(V₁₁) / σₙ(V₁₁)`.
    pub kappa_v11: f64,
    pub alpha_from_v11: f64,
}

impl V11Analysis {
    /// Largest deviation of the spectrum from `(1, …, 1, α)`.
    pub fn spectrum_defect(&self, alpha: f64) -> f64 {
        let n = self.singular_values.len();
        self.singular_values
            .iter()
            .enumerate()
            .map(|(i, &s)| if i + 1 < n { (s - 1.0).abs() } else { (s - alpha).abs() })
            .fold(0.0, f64::max)
    }
}

pub fn v11_spectrum(bundle: &SvdBundle, _solution: &TlsSolution) -> Result<V11Analysis> {
    let singular_values = singular_values(&bundle.v11())?;
    let n = singular_values.len();
    let alpha_from_v11 = singular_values[n - 1];
    Ok(V11Analysis {
        kappa_v11: singular_values[0] / alpha_from_v11,
        alpha_from_v11,
        singular_values,
    })
}
