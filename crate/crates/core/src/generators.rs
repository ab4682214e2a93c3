//! Seeded test-problem generators.
//!
//! All randomness comes from `ChaCha8Rng`, seeded with the user seed and
//! split into independent streams with `set_stream`, so every output is a
//! pure function of its parameters. Normal variates use `rand_distr`'s
//! `StandardNormal` (ziggurat).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Map, Value};

use crate::error::{Result, TlsError};
use crate::linalg::{spectral_norm, thin_svd};
use crate::problem::TlsProblem;
use crate::tls::{check_uniqueness, svd_bundle};

pub const MAX_ATTEMPTS: u64 = 10;

// stream ids; attempt k of a retry loop adds k * STREAM_STRIDE
const STREAM_V_TILDE: u64 = 1;
/// Stream of `seed` from which [`generate_v`] draws its `U`.
pub const GENERATE_V_STREAM: u64 = 2;
const STREAM_U: u64 = GENERATE_V_STREAM;
const STREAM_B: u64 = 3;
const STREAM_E: u64 = 4;
const STREAM_NOISE: u64 = 5;
const STREAM_STRIDE: u64 = 16;

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub(crate) fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

fn haar_from_rng(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, n, n).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Haar-distributed orthogonal `n × n` matrix: QR of a Gaussian matrix with
/// the signs of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    haar_orthogonal_stream(n, seed, STREAM_V_TILDE)
}

pub fn haar_orthogonal_stream(n: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    haar_from_rng(&mut rng_for(seed, stream), n)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(TlsError::InvalidAlpha(alpha))
    }
}

/// Orthogonal `(n+1) × (n+1)` matrix with `V(n+1, n+1) = −α`:
///
/// ```text
/// V = [ V₁₁            √(1−α²) uₙ ]     V₁₁ = [u₁ … uₙ₋₁][ṽ₁ … ṽₙ₋₁]ᵀ + α uₙṽₙᵀ
///     [ √(1−α²) ṽₙᵀ   −α         ]
/// ```
///
/// with `U = [u₁ … uₙ]` Haar-random from `seed`.
pub fn generate_v(n: usize, v_tilde: &DMatrix<f64>, alpha: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_alpha(alpha)?;
    if n == 0 || v_tilde.shape() != (n, n) {
        return Err(TlsError::Shape(format!(
            "Ṽ must be {n} × {n}, got {} × {}",
            v_tilde.nrows(),
            v_tilde.ncols()
        )));
    }
    let u = haar_from_rng(&mut rng_for(seed, STREAM_U), n);
    Ok(assemble_v(&u, v_tilde, alpha))
}

fn assemble_v(u: &DMatrix<f64>, v_tilde: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let n = u.ncols();
    let c = (1.0 - alpha * alpha).sqrt();
    let mut mid = DVector::from_element(n, 1.0);
    mid[n - 1] = alpha;
    let v11 = u * DMatrix::from_diagonal(&mid) * v_tilde.transpose();

    let mut v = DMatrix::zeros(n + 1, n + 1);
    v.view_mut((0, 0), (n, n)).copy_from(&v11);
    v.view_mut((0, n), (n, 1)).copy_from(&(u.column(n - 1) * c));
    v.view_mut((n, 0), (1, n)).copy_from(&(v_tilde.column(n - 1).transpose() * c));
    v[(n, n)] = -alpha;
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    AlphaControlled,
    KammNagy,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::AlphaControlled => "alpha",
            GeneratorKind::KammNagy => "kammnagy",
        }
    }
}

/// Parameters of [`generate_ab_alpha`].
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n: usize,
    pub alpha_target: f64,
    pub seed: u64,
    pub kind: GeneratorKind,
}

impl GeneratorConfig {
    pub fn new(m: usize, n: usize, alpha_target: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            alpha_target,
            seed,
            kind: GeneratorKind::AlphaControlled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha_target)?;
        if self.n == 0 || self.m <= self.n {
            return Err(TlsError::Shape(format!("need m > n ≥ 1, got m = {}, n = {}", self.m, self.n)));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<TlsProblem> {
        generate_ab_alpha(self.m, self.n, self.alpha_target, self.seed)
    }

    pub fn metadata(&self) -> Map<String, Value> {
        let v = json!({
            "kind": self.kind.name(),
            "m": self.m,
            "n": self.n,
            "alpha": self.alpha_target,
            "seed": self.seed,
        });
        v.as_object().cloned().unwrap_or_default()
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

/// `[A b] = U Σ Vᵀ` where `U, Σ` are the thin SVD factors of an
/// `m × (n+1)` uniform(0,1) matrix and `V` comes from [`generate_v`] with a
/// Haar `Ṽ`. The TLS solution then has `α = 1/√(1+‖x‖²)` equal to `alpha`.
pub fn generate_ab_alpha(m: usize, n: usize, alpha: f64, seed: u64) -> Result<TlsProblem> {
    GeneratorConfig::new(m, n, alpha, seed).validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let shift = attempt * STREAM_STRIDE;
        let v_tilde = haar_from_rng(&mut rng_for(seed, STREAM_V_TILDE + shift), n);
        let u = haar_from_rng(&mut rng_for(seed, STREAM_U + shift), n);
        let v = assemble_v(&u, &v_tilde, alpha);
        let b = uniform_matrix(&mut rng_for(seed, STREAM_B + shift), m, n + 1);
        let svd = thin_svd(&b)?;
        let ab = &svd.u * DMatrix::from_diagonal(&svd.s) * v.transpose();
        let problem = TlsProblem::from_augmented(&ab, format!("alpha-m{m}-n{n}-a{alpha:e}-s{seed}"))?;
        if has_gap(&problem)? {
            return Ok(problem);
        }
    }
    Err(TlsError::GapFailure {
        attempts: MAX_ATTEMPTS as usize,
    })
}

fn has_gap(problem: &TlsProblem) -> Result<bool> {
    let gap = check_uniqueness(&svd_bundle(problem)?);
    Ok(gap.gap_ok && gap.nontrivial)
}

/// Parameters of [`kamm_nagy_problem`]. `spread` is the Gaussian kernel
/// width; `n = m − 2ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct KammNagyConfig {
    pub m: usize,
    pub omega: usize,
    pub spread: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl KammNagyConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            omega: 8,
            spread: 1.25,
            gamma: 1e-3,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.m.saturating_sub(2 * self.omega)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega == 0 {
            return Err(TlsError::InvalidArgument("ω must be at least 1".into()));
        }
        if self.m < 2 * self.omega + 2 {
            return Err(TlsError::Shape(format!(
                "m = {} too small for ω = {} (need m ≥ 2ω + 2)",
                self.m, self.omega
            )));
        }
        if !(self.spread > 0.0 && self.spread.is_finite()) {
            return Err(TlsError::InvalidArgument(format!("spread must be positive, got {}", self.spread)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(TlsError::InvalidArgument(format!("γ must be nonnegative, got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn metadata(&self) -> Map<String, Value> {
        let v = json!({
            "kind": GeneratorKind::KammNagy.name(),
            "m": self.m,
            "n": self.n(),
            "omega": self.omega,
            "spread": self.spread,
            "gamma": self.gamma,
            "seed": self.seed,
        });
        v.as_object().cloned().unwrap_or_default()
    }
}

/// `tᵢ = exp(−(ω−i+1)²/(2s²)) / √(2πs²)` for `i = 1 … 2ω+1`, zero after.
pub fn gaussian_kernel_column(m: usize, omega: usize, spread: f64) -> DVector<f64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * spread * spread).sqrt();
    DVector::from_fn(m, |i, _| {
        if i <= 2 * omega {
            let d = omega as f64 - i as f64;
            norm * (-d * d / (2.0 * spread * spread)).exp()
        } else {
            0.0
        }
    })
}

/// Lower-banded `m × n` Toeplitz matrix with first column `col` and first
/// row `[col₁, 0, …, 0]`.
pub fn banded_toeplitz(col: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let m = col.len();
    DMatrix::from_fn(m, n, |i, j| if i >= j { col[i - j] } else { 0.0 })
}

/// `A = T̄ + E`, `b = ḡ + e` with `ḡ = 1`, `E` a Gaussian Toeplitz matrix on
/// the support of `T̄` and `e` Gaussian, rescaled to `‖E‖₂ = γ‖T̄‖₂` and
/// `‖e‖ = γ‖ḡ‖`.
pub fn kamm_nagy_problem(config: &KammNagyConfig) -> Result<TlsProblem> {
    config.validate()?;
    let (m, omega, n) = (config.m, config.omega, config.n());
    let t_bar = banded_toeplitz(&gaussian_kernel_column(m, omega, config.spread), n);
    let g_bar = DVector::from_element(m, 1.0);
    let label = format!("kammnagy-m{m}-s{}", config.seed);

    // noise-free pair: returned as is; the symmetric kernel against ḡ = 1
    // usually makes it nongeneric
    if config.gamma == 0.0 {
        return TlsProblem::new(t_bar, g_bar, label);
    }

    let t_norm = spectral_norm(&t_bar)?;
    for attempt in 0..MAX_ATTEMPTS {
        let shift = attempt * STREAM_STRIDE;
        let mut rng = rng_for(config.seed, STREAM_E + shift);
        let mut e_col = DVector::zeros(m);
        for i in 0..=2 * omega {
            e_col[i] = rng.sample(StandardNormal);
        }
        let e_mat = banded_toeplitz(&e_col, n);
        let e_mat = &e_mat * (config.gamma * t_norm / spectral_norm(&e_mat)?);
        let e_vec = gaussian_vector(&mut rng_for(config.seed, STREAM_NOISE + shift), m);
        let e_vec = &e_vec * (config.gamma * g_bar.norm() / e_vec.norm());
        let problem = TlsProblem::new(&t_bar + e_mat, &g_bar + e_vec, label.clone())?;
        if has_gap(&problem)? {
            return Ok(problem);
        }
    }
    Err(TlsError::GapFailure {
        attempts: MAX_ATTEMPTS as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, singular_values};
    use crate::tls::solve_tls;

    #[test]
    fn haar_is_orthogonal_and_deterministic() {
        let q1 = haar_orthogonal(1, 3);
        assert_eq!(q1[(0, 0)].abs(), 1.0);
        assert_eq!(haar_orthogonal(5, 9), haar_orthogonal(5, 9));
        assert_ne!(haar_orthogonal(5, 9), haar_orthogonal(5, 10));
        assert!(orthonormality_defect(&haar_orthogonal(50, 1)) <= 1e-12);
    }

    #[test]
    fn generate_v_structure() {
        let vt = haar_orthogonal(6, 1);
        let v = generate_v(6, &vt, 0.3, 2).unwrap();
        assert_eq!(v[(6, 6)], -0.3);
        assert!(orthonormality_defect(&v) <= 1e-13 * 6.0);
        let sv = singular_values(&v.view((0, 0), (6, 6)).into_owned()).unwrap();
        for i in 0..5 {
            assert!((sv[i] - 1.0).abs() < 1e-12);
        }
        assert!((sv[5] - 0.3).abs() < 1e-12);
        assert!(matches!(generate_v(6, &vt, 1.0, 2), Err(TlsError::InvalidAlpha(_))));
        assert!(matches!(generate_v(6, &vt, 0.0, 2), Err(TlsError::InvalidAlpha(_))));
    }

    #[test]
    fn generate_v_two_by_two() {
        let v = generate_v(1, &DMatrix::from_element(1, 1, 1.0), 0.5, 4).unwrap();
        assert_eq!(v[(1, 1)], -0.5);
        assert!((v[(0, 1)].abs() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((v[(1, 0)] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((v[(0, 0)].abs() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_controlled_problem_hits_alpha() {
        let p = generate_ab_alpha(20, 5, 0.9, 7).unwrap();
        let bundle = svd_bundle(&p).unwrap();
        let sol = solve_tls(&p, &bundle).unwrap();
        assert!((sol.alpha - 0.9).abs() < 1e-10 * 0.9);
        assert_eq!(generate_ab_alpha(20, 5, 0.9, 7).unwrap(), p);
        assert!(matches!(generate_ab_alpha(5, 5, 0.5, 1), Err(TlsError::Shape(_))));
        assert!(matches!(generate_ab_alpha(8, 5, 1.5, 1), Err(TlsError::InvalidAlpha(_))));
    }

    #[test]
    fn kernel_column_shape() {
        let t = gaussian_kernel_column(20, 8, 1.25);
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 1.25 * 1.25).sqrt();
        assert_eq!(t[8], peak);
        for i in 0..=16 {
            assert_eq!(t[i], t[16 - i]);
        }
        assert!(t.rows(17, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kamm_nagy_noise_free_and_scaled() {
        let mut cfg = KammNagyConfig::new(40, 5);
        cfg.gamma = 0.0;
        let p = kamm_nagy_problem(&cfg).unwrap();
        let t_bar = banded_toeplitz(&gaussian_kernel_column(40, 8, 1.25), 24);
        assert_eq!(p.a(), &t_bar);
        assert!(p.b().iter().all(|v| *v == 1.0));

        cfg.gamma = 1e-3;
        let p = kamm_nagy_problem(&cfg).unwrap();
        let e = p.a() - &t_bar;
        let ratio = spectral_norm(&e).unwrap() / spectral_norm(&t_bar).unwrap();
        assert!((ratio - 1e-3).abs() < 1e-12 * 1e-3 * 1e3);
        for i in 0..40 {
            for j in 0..24 {
                if t_bar[(i, j)] == 0.0 {
                    assert_eq!(e[(i, j)], 0.0);
                }
            }
        }
        assert!(((p.b() - DVector::from_element(40, 1.0)).norm() - 1e-3 * 40f64.sqrt()).abs() < 1e-15);
        assert!(kamm_nagy_problem(&KammNagyConfig::new(17, 1)).is_err());
    }
}
