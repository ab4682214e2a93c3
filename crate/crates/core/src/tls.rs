//! Thin SVDs, the uniqueness gap, the TLS solution and its identity checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TlsError};
use crate::linalg::{lu_solve, orthonormality_defect, spectral_norm, thin_svd};
use crate::problem::TlsProblem;

/// Relative gap below which the normal-equations cross-check is skipped.
pub const CROSS_CHECK_MIN_REL_GAP: f64 = 1e-6;
/// Agreement required between the two solution formulas.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Tolerance for the scaled identity residuals.
pub const IDENTITY_TOL: f64 = 1e-10;
/// `|v(n+1, n+1)|` at or below this means the SVD produced garbage.
pub const DEGENERATE_LAST_ENTRY: f64 = 1e-14;

/// Thin SVDs of `A` and `[A b]`.
///
/// Singular values are descending. Signs are canonical: each right singular
/// vector of `A` has its largest-magnitude entry positive; for `[A b]` the
/// first `n` right singular vectors have a nonnegative last entry and
/// `v_{n+1}` has a nonpositive last entry, so `V(n+1, n+1) = −α`.
#[derive(Debug, Clone)]
pub struct SvdBundle {
    pub sigma_hat: DVector<f64>,
    pub u_hat: DMatrix<f64>,
    pub v_hat: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub u_aug: DMatrix<f64>,
    pub v_aug: DMatrix<f64>,
}

/// Numerical health of an [`SvdBundle`].
#[derive(Debug, Clone, Copy)]
pub struct SvdChecks {
    /// Worst `‖QᵀQ − I‖_F` over the four singular-vector matrices.
    pub orthonormality: f64,
    /// Worst relative Frobenius reconstruction residual of `A` and `[A b]`.
    pub reconstruction: f64,
    /// Worst interlacing violation `max(σ̂ᵢ − σᵢ, σᵢ₊₁ − σ̂ᵢ, 0) / σ₁`.
    pub interlacing: f64,
}

impl SvdChecks {
    pub fn hold(&self, m: usize, n: usize) -> bool {
        let tol = 1e-12 * m.max(n) as f64;
        self.orthonormality <= tol && self.reconstruction <= 1e-12 && self.interlacing <= 1e-12
    }
}

fn flip_column(u: &mut DMatrix<f64>, v: &mut DMatrix<f64>, j: usize) {
    u.column_mut(j).neg_mut();
    v.column_mut(j).neg_mut();
}

fn largest_entry_sign(col: nalgebra::DVectorView<'_, f64>) -> f64 {
    let idx = col.iamax();
    col[idx].signum()
}

impl SvdBundle {
    pub fn n(&self) -> usize {
        self.sigma_hat.len()
    }

    /// `σ_{n+1}`.
    pub fn sigma_last(&self) -> f64 {
        self.sigma[self.n()]
    }

    /// Leading `n × n` block of `V`.
    pub fn v11(&self) -> DMatrix<f64> {
        let n = self.n();
        self.v_aug.view((0, 0), (n, n)).into_owned()
    }

    /// `[β₁, …, βₙ]`, the first `n` entries of the last row of `V`.
    pub fn beta(&self) -> DVector<f64> {
        let n = self.n();
        self.v_aug.row(n).columns(0, n).transpose()
    }

    /// `V₁₁⁻ᵀ = V₁₁ − v₁₂βᵀ/v₂₂` with `v₁₂` the last column of `V` above
    /// the corner `v₂₂ = −α`. Follows from `V₁₁ᵀV₁₁ = I − ββᵀ` and
    /// `V₁₁β = −v₂₂v₁₂`, and avoids solving with `V₁₁`, whose condition
    /// number is `1/α`. `None` when `v₂₂ = 0`.
    pub fn v11_inv_t(&self) -> Option<DMatrix<f64>> {
        let n = self.n();
        let corner = self.v_aug[(n, n)];
        if corner == 0.0 {
            return None;
        }
        let v12 = self.v_aug.view((0, n), (n, 1));
        Some(self.v11() - v12 * self.beta().transpose() / corner)
    }

    /// `v_{n+1}`, sign-normalized.
    pub fn last_right_vector(&self) -> DVector<f64> {
        self.v_aug.column(self.n()).into_owned()
    }

    /// `λᵢ = σᵢ² − σ²_{n+1}`, `i = 1..n`, formed as a product of sum and
    /// difference.
    pub fn lambda(&self) -> DVector<f64> {
        let last = self.sigma_last();
        DVector::from_iterator(
            self.n(),
            self.sigma.iter().take(self.n()).map(|&s| (s - last) * (s + last)),
        )
    }

    pub fn checks(&self, problem: &TlsProblem) -> SvdChecks {
        let orthonormality = [&self.u_hat, &self.v_hat, &self.u_aug, &self.v_aug]
            .iter()
            .map(|q| orthonormality_defect(q))
            .fold(0.0, f64::max);

        let rebuild = |u: &DMatrix<f64>, s: &DVector<f64>, v: &DMatrix<f64>| {
            u * DMatrix::from_diagonal(s) * v.transpose()
        };
        let ab = problem.augmented();
        let res_aug = (&ab - rebuild(&self.u_aug, &self.sigma, &self.v_aug)).norm() / ab.norm();
        let a = problem.a();
        let res_a = (a - rebuild(&self.u_hat, &self.sigma_hat, &self.v_hat)).norm() / a.norm();

        let s1 = self.sigma[0].max(f64::MIN_POSITIVE);
        let interlacing = (0..self.n())
            .map(|i| {
                let above = self.sigma_hat[i] - self.sigma[i];
                let below = self.sigma[i + 1] - self.sigma_hat[i];
                above.max(below).max(0.0) / s1
            })
            .fold(0.0, f64::max);

        SvdChecks {
            orthonormality,
            reconstruction: res_aug.max(res_a),
            interlacing,
        }
    }
}

pub fn svd_bundle(problem: &TlsProblem) -> Result<SvdBundle> {
    let n = problem.cols();

    let a_svd = thin_svd(problem.a())?;
    let (mut u_hat, mut v_hat) = (a_svd.u, a_svd.v);
    for j in 0..n {
        if largest_entry_sign(v_hat.column(j)) < 0.0 {
            flip_column(&mut u_hat, &mut v_hat, j);
        }
    }

    let aug_svd = thin_svd(&problem.augmented())?;
    let (mut u_aug, mut v_aug) = (aug_svd.u, aug_svd.v);
    for j in 0..=n {
        let last = v_aug[(n, j)];
        let sign = if last != 0.0 {
            last.signum()
        } else {
            largest_entry_sign(v_aug.column(j))
        };
        let want = if j < n { 1.0 } else { -1.0 };
        if sign != want {
            flip_column(&mut u_aug, &mut v_aug, j);
        }
    }

    Ok(SvdBundle {
        sigma_hat: a_svd.s,
        u_hat,
        v_hat,
        sigma: aug_svd.s,
        u_aug,
        v_aug,
    })
}

/// Classification of the uniqueness condition `0 < σ_{n+1} < σ̂ₙ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapDiagnostics {
    pub gap_ok: bool,
    pub nontrivial: bool,
    /// `(σ̂ₙ − σ_{n+1}) / σ̂ₙ`.
    pub rel_gap: f64,
    /// `σ_{n+1} / σₙ`.
    pub ratio_sigma_n: f64,
    /// `σ_{n+1} / σ̂ₙ`, equal to `1 − rel_gap`.
    pub ratio_sigma_hat_n: f64,
    /// `σ̂ₙ − σ_{n+1}`.
    pub gap: f64,
    /// `σ̂ₙ² − σ²_{n+1}`.
    pub gap_sq: f64,
    /// True when the gap came from `V₁₁` rather than from subtracting the
    /// two independently computed singular values.
    pub refined: bool,
}

impl GapDiagnostics {
    /// Classify from the raw singular values `σ̂ₙ`, `σₙ`, `σ_{n+1}`.
    pub fn from_values(sigma_hat_n: f64, sigma_n: f64, sigma_last: f64, trivial_floor: f64) -> Self {
        let gap = sigma_hat_n - sigma_last;
        Self::assemble(sigma_hat_n, sigma_n, sigma_last, gap, gap * (sigma_hat_n + sigma_last), trivial_floor, false)
    }

    fn assemble(
        sigma_hat_n: f64,
        sigma_n: f64,
        sigma_last: f64,
        gap: f64,
        gap_sq: f64,
        trivial_floor: f64,
        refined: bool,
    ) -> Self {
        let rel_gap = if sigma_hat_n > 0.0 { gap / sigma_hat_n } else { 0.0 };
        let ratio_sigma_n = if sigma_n > 0.0 { sigma_last / sigma_n } else { 1.0 };
        Self {
            gap_ok: rel_gap > 0.0,
            nontrivial: sigma_last > trivial_floor,
            rel_gap,
            ratio_sigma_n,
            ratio_sigma_hat_n: 1.0 - rel_gap,
            gap,
            gap_sq,
            refined,
        }
    }
}

/// Gap diagnostics for a bundle.
///
/// Subtracting `σ_{n+1}` from `σ̂ₙ` loses every digit once the gap drops
/// near machine precision, because the two values come from different
/// decompositions. Whenever `σₙ > σ_{n+1}` and `V₁₁` is invertible the gap
/// is taken instead from `σ̂ₙ² − σ²_{n+1} = λ_min(V₁₁ Λ V₁₁ᵀ)
/// = 1 / ‖V₁₁⁻ᵀ Λ^{-1/2}‖²`, which only uses the SVD of `[A b]`.
pub fn check_uniqueness(bundle: &SvdBundle) -> GapDiagnostics {
    let n = bundle.n();
    let sigma_hat_n = bundle.sigma_hat[n - 1];
    let sigma_n = bundle.sigma[n - 1];
    let sigma_last = bundle.sigma_last();
    let rows = bundle.u_aug.nrows();
    let trivial_floor = f64::EPSILON * bundle.sigma[0] * rows.max(n + 1) as f64;

    let direct = GapDiagnostics::from_values(sigma_hat_n, sigma_n, sigma_last, trivial_floor);
    if !direct.nontrivial || sigma_n <= sigma_last {
        return direct;
    }
    if bundle.v_aug[(n, n)].abs() <= DEGENERATE_LAST_ENTRY {
        return direct;
    }

    let lambda = bundle.lambda();
    let rhs = DMatrix::from_diagonal(&lambda.map(|l| 1.0 / l.sqrt()));
    let refined_sq = bundle
        .v11_inv_t()
        .and_then(|y| spectral_norm(&(y * rhs)).ok())
        .map(|norm| 1.0 / (norm * norm))
        .filter(|g| g.is_finite() && *g > 0.0);
    match refined_sq {
        Some(gap_sq) => GapDiagnostics::assemble(
            sigma_hat_n,
            sigma_n,
            sigma_last,
            gap_sq / (sigma_hat_n + sigma_last),
            gap_sq,
            trivial_floor,
            true,
        ),
        None => direct,
    }
}

/// Scaled residuals of the three TLS identities; each should be ≤ [`IDENTITY_TOL`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    /// `|‖r‖²/(1+‖x‖²) − σ²_{n+1}| / σ²_{n+1}`.
    pub sigma_relation: f64,
    /// `‖Aᵀr − σ²_{n+1} x‖ / (σ²_{n+1} max(1, ‖x‖))`.
    pub gradient_relation: f64,
    /// `‖v_{n+1} − α [x; −1]‖`.
    pub vector_relation: f64,
}

impl IdentityResiduals {
    pub fn hold(&self) -> bool {
        self.sigma_relation <= IDENTITY_TOL
            && self.gradient_relation <= IDENTITY_TOL
            && self.vector_relation <= IDENTITY_TOL
    }
}

/// Outcome of comparing the singular-vector solution with `(AᵀA − σ²I)⁻¹Aᵀb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossCheck {
    Compared { rel_diff: f64, agrees: bool },
    /// Gap below [`CROSS_CHECK_MIN_REL_GAP`]; the normal equations are
    /// numerically singular there.
    Skipped { rel_gap: f64 },
}

#[derive(Debug, Clone)]
pub struct TlsSolution {
    pub x: DVector<f64>,
    /// `r = A x − b`.
    pub r: DVector<f64>,
    /// `1/√(1+‖x‖²)`.
    pub alpha: f64,
    /// `v_{n+1}` with last entry `−α`.
    pub last_right_vector: DVector<f64>,
    pub identity_residuals: IdentityResiduals,
    pub gap: GapDiagnostics,
    pub cross_check: CrossCheck,
}

impl TlsSolution {
    /// `√(1+‖x‖²)`.
    pub fn inv_alpha(&self) -> f64 {
        (1.0 + self.x.norm_squared()).sqrt()
    }
}

pub fn solve_tls(problem: &TlsProblem, bundle: &SvdBundle) -> Result<TlsSolution> {
    let n = bundle.n();
    let gap = check_uniqueness(bundle);
    if !gap.gap_ok {
        return Err(TlsError::NoUniqueSolution {
            sigma_hat_n: bundle.sigma_hat[n - 1],
            sigma_last: bundle.sigma_last(),
        });
    }
    if !gap.nontrivial {
        return Err(TlsError::TrivialProblem);
    }

    let v = bundle.last_right_vector();
    let last = v[n];
    if last.abs() <= DEGENERATE_LAST_ENTRY {
        return Err(TlsError::DegenerateVector(last));
    }
    let x = -v.rows(0, n) / last;
    let alpha = 1.0 / (1.0 + x.norm_squared()).sqrt();
    let a = problem.a();
    let r = a * &x - problem.b();

    let sigma2 = bundle.sigma_last().powi(2);
    let cross_check = if gap.rel_gap >= CROSS_CHECK_MIN_REL_GAP {
        let p = a.transpose() * a - DMatrix::<f64>::identity(n, n) * sigma2;
        let rhs = DMatrix::from_column_slice(n, 1, (a.transpose() * problem.b()).as_slice());
        match lu_solve(&p, &rhs) {
            Some(x_ne) => {
                let x_ne = x_ne.column(0).into_owned();
                let scale = x.norm().max(x_ne.norm());
                let rel_diff = if scale > 0.0 { (&x - &x_ne).norm() / scale } else { 0.0 };
                CrossCheck::Compared {
                    rel_diff,
                    agrees: rel_diff <= CROSS_CHECK_TOL,
                }
            }
            None => CrossCheck::Compared {
                rel_diff: f64::INFINITY,
                agrees: false,
            },
        }
    } else {
        CrossCheck::Skipped { rel_gap: gap.rel_gap }
    };

    let identity_residuals = identity_residuals(a, &x, &r, &v, alpha, sigma2);
    Ok(TlsSolution {
        x,
        r,
        alpha,
        last_right_vector: v,
        identity_residuals,
        gap,
        cross_check,
    })
}

fn identity_residuals(
    a: &DMatrix<f64>,
    x: &DVector<f64>,
    r: &DVector<f64>,
    v: &DVector<f64>,
    alpha: f64,
    sigma2: f64,
) -> IdentityResiduals {
    let n = x.len();
    let xx = x.norm_squared();
    let sigma_relation = (r.norm_squared() / (1.0 + xx) - sigma2).abs() / sigma2;
    let gradient_relation = (a.transpose() * r - x * sigma2).norm() / (sigma2 * x.norm().max(1.0));
    let mut stacked = DVector::from_element(n + 1, -1.0);
    stacked.rows_mut(0, n).copy_from(x);
    let vector_relation = (v - stacked * alpha).norm();
    IdentityResiduals {
        sigma_relation,
        gradient_relation,
        vector_relation,
    }
}

/// The bracket `|ûₙᵀb| / (2‖x‖) ≤ σ̂ₙ − σ_{n+1} ≤ ‖b‖ / ‖x‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GolubCheck {
    /// `x = 0`.
    NotApplicable,
    Evaluated {
        lower: f64,
        gap: f64,
        upper: f64,
        holds: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualDiagnostics {
    pub identities: IdentityResiduals,
    pub golub: GolubCheck,
}

pub fn residual_diagnostics(
    problem: &TlsProblem,
    bundle: &SvdBundle,
    solution: &TlsSolution,
) -> ResidualDiagnostics {
    let sigma2 = bundle.sigma_last().powi(2);
    let identities = identity_residuals(
        problem.a(),
        &solution.x,
        &solution.r,
        &solution.last_right_vector,
        solution.alpha,
        sigma2,
    );
    let x_norm = solution.x.norm();
    let golub = if x_norm == 0.0 {
        GolubCheck::NotApplicable
    } else {
        let n = bundle.n();
        let u_n = bundle.u_hat.column(n - 1);
        let lower = u_n.dot(problem.b()).abs() / (2.0 * x_norm);
        let upper = problem.b().norm() / x_norm;
        let gap = solution.gap.gap;
        // σ̂ₙ² and σ²_{n+1} each carry an error of order ε σ₁², so the
        // computed gap and x are only good to that relative level.
        let rounding = 16.0 * f64::EPSILON * (problem.rows() + n) as f64 * bundle.sigma[0].powi(2)
            / solution.gap.gap_sq;
        let slack = 1.0 + 1e-9 + rounding;
        GolubCheck::Evaluated {
            lower,
            gap,
            upper,
            holds: lower <= gap * slack && gap <= upper * slack,
        }
    };
    ResidualDiagnostics { identities, golub }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(a: &[f64], b: &[f64]) -> TlsProblem {
        TlsProblem::new(
            DMatrix::from_column_slice(b.len(), a.len() / b.len(), a),
            DVector::from_column_slice(b),
            "t",
        )
        .unwrap()
    }

    fn fix_a() -> TlsProblem {
        problem(&[2.0, 0.0], &[0.0, 1.0])
    }

    fn fix_b() -> TlsProblem {
        problem(&[1.0, 0.0], &[1.0, 1.0])
    }

    #[test]
    fn diagonal_fixture_singular_values() {
        let p = fix_a();
        let bundle = svd_bundle(&p).unwrap();
        assert!((bundle.sigma_hat[0] - 2.0).abs() < 1e-15);
        assert!((bundle.sigma[0] - 2.0).abs() < 1e-15);
        assert!((bundle.sigma[1] - 1.0).abs() < 1e-15);
        assert!(bundle.checks(&p).hold(2, 1));
    }

    #[test]
    fn golden_ratio_fixture_singular_values() {
        let p = fix_b();
        let bundle = svd_bundle(&p).unwrap();
        let s5 = 5f64.sqrt();
        assert!((bundle.sigma[0].powi(2) - (3.0 + s5) / 2.0).abs() < 1e-14);
        assert!((bundle.sigma[1].powi(2) - (3.0 - s5) / 2.0).abs() < 1e-14);
        assert!((bundle.sigma_hat[0] - 1.0).abs() < 1e-15);
        assert!(bundle.checks(&p).hold(2, 1));
    }

    #[test]
    fn classification_from_values() {
        let g = GapDiagnostics::from_values(2.0, 3.0, 1.0, 0.0);
        assert!(g.gap_ok && g.nontrivial);
        assert_eq!(g.rel_gap, 0.5);
        let g = GapDiagnostics::from_values(2.0, 3.0, 0.0, 0.0);
        assert!(!g.nontrivial);
        let g = GapDiagnostics::from_values(1.0, 1.0, 1.0, 0.0);
        assert!(!g.gap_ok);
    }

    #[test]
    fn refined_gap_matches_closed_form() {
        // σ̂ = 1, σ²_{n+1} = (3 − √5)/2, so σ̂² − σ²_{n+1} = (√5 − 1)/2.
        let bundle = svd_bundle(&fix_b()).unwrap();
        let g = check_uniqueness(&bundle);
        assert!(g.refined);
        assert!((g.gap_sq - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-14);
        let direct = 1.0 - bundle.sigma_last();
        assert!((g.gap - direct).abs() < 1e-14);
    }

    #[test]
    fn solves_diagonal_fixture() {
        let p = fix_a();
        let bundle = svd_bundle(&p).unwrap();
        let sol = solve_tls(&p, &bundle).unwrap();
        assert_eq!(sol.x[0], 0.0);
        assert_eq!(sol.alpha, 1.0);
        assert!((sol.r[0]).abs() < 1e-15 && (sol.r[1] + 1.0).abs() < 1e-15);
        assert!(sol.identity_residuals.hold());
        assert!(matches!(sol.cross_check, CrossCheck::Compared { agrees: true, .. }));
        assert_eq!(residual_diagnostics(&p, &bundle, &sol).golub, GolubCheck::NotApplicable);
    }

    #[test]
    fn solves_golden_ratio_fixture() {
        let p = fix_b();
        let bundle = svd_bundle(&p).unwrap();
        let sol = solve_tls(&p, &bundle).unwrap();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.x[0] - phi).abs() < 1e-14);
        assert!((sol.r[0] - (phi - 1.0)).abs() < 1e-14);
        assert!((sol.r[1] + 1.0).abs() < 1e-14);
        assert!((sol.last_right_vector[1] + sol.alpha).abs() < 1e-15);
        assert!(sol.identity_residuals.hold());
        match residual_diagnostics(&p, &bundle, &sol).golub {
            GolubCheck::Evaluated { lower, gap, upper, holds } => {
                assert!(holds);
                assert!((lower - 1.0 / (2.0 * phi)).abs() < 1e-14);
                assert!((gap - (2.0 - phi)).abs() < 1e-14);
                assert!((upper - 2f64.sqrt() / phi).abs() < 1e-14);
            }
            GolubCheck::NotApplicable => panic!("x is nonzero"),
        }
    }

    #[test]
    fn equal_gap_has_no_unique_solution() {
        let p = problem(&[1.0, 0.0], &[0.0, 1.0]);
        let bundle = svd_bundle(&p).unwrap();
        assert!(!check_uniqueness(&bundle).gap_ok);
        assert!(matches!(solve_tls(&p, &bundle), Err(TlsError::NoUniqueSolution { .. })));
    }

    #[test]
    fn zero_last_entry_has_no_unique_solution() {
        // [A b] = diag(1, 2): v_{n+1} = e₁, σ̂ₙ = σ_{n+1} = 1.
        let p = problem(&[1.0, 0.0], &[0.0, 2.0]);
        let bundle = svd_bundle(&p).unwrap();
        assert!(matches!(solve_tls(&p, &bundle), Err(TlsError::NoUniqueSolution { .. })));
    }

    #[test]
    fn consistent_system_is_trivial() {
        let p = problem(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0], &[1.0, 2.0, 0.0]);
        let bundle = svd_bundle(&p).unwrap();
        assert!(!check_uniqueness(&bundle).nontrivial);
        assert!(matches!(solve_tls(&p, &bundle), Err(TlsError::TrivialProblem)));
    }
}
