use std::io;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants are grouped into stable classes by [`TlsError::exit_code`], which
/// the command-line front end uses as its process exit status.
#[derive(Debug, Error)]
pub enum TlsError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("SVD failed to converge: {0}")]
    Convergence(String),

    #[error("no unique TLS solution: sigma_(n+1) = {sigma_last:e} is not below sigma_hat_n = {sigma_hat_n:e}")]
    NoUniqueSolution { sigma_hat_n: f64, sigma_last: f64 },

    #[error("trivial problem: sigma_(n+1) = 0, b lies in the range of A")]
    TrivialProblem,

    #[error("degenerate last right singular vector: |v(n+1, n+1)| = {0:e}")]
    DegenerateVector(f64),

    #[error("gap too small for this formula: relative gap {rel_gap:e} < {threshold:e}")]
    IllConditionedGap { rel_gap: f64, threshold: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("V11 block is numerically singular")]
    SingularBlock,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),

    #[error("generated problem violates the gap condition after {attempts} attempts")]
    GapFailure { attempts: usize },

    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(String),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl TlsError {
    /// Process exit code for this error class.
    ///
    /// 2 input/parse/shape, 3 no unique solution, 4 not applicable or gap too
    /// small for the requested formula, 5 internal numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            TlsError::Parse(_)
            | TlsError::Shape(_)
            | TlsError::Io(_)
            | TlsError::InvalidArgument(_)
            | TlsError::InvalidAlpha(_) => 2,
            TlsError::NoUniqueSolution { .. } | TlsError::TrivialProblem | TlsError::GapFailure { .. } => 3,
            TlsError::NotApplicable(_)
            | TlsError::IllConditionedGap { .. }
            | TlsError::PerturbationTooLarge(_) => 4,
            TlsError::Convergence(_)
            | TlsError::DegenerateVector(_)
            | TlsError::Factorization(_)
            | TlsError::SingularBlock
            | TlsError::BoundViolation(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, TlsError>;
