use thiserror::Error;

/// Crate-wide error type.
///
/// Statistical failure modes get their own variants so callers (and the C
/// ABI) can react to them individually; plumbing failures wrap the underlying
/// error.
#[derive(Debug, Error)]
pub enum Error {
    /// An iterative fit ran out of iterations before meeting its tolerance.
    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    /// The propensity model is separable: the likelihood has no finite
    /// maximizer (coefficients diverge or fitted probabilities saturate).
    #[error("logistic model is separable; propensity scores are not identified")]
    Separation,

    /// The weighted normal equations of the logistic fit are singular.
    #[error("singular design in logistic fit")]
    SingularDesign,

    /// A cross-product matrix could not be factorized (collinear columns or a
    /// non-positive-definite posterior covariance).
    #[error("rank-deficient matrix: {0}")]
    RankDeficient(&'static str),

    /// Fewer rows than the operation needs.
    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    /// The effective sample size of the external weights is too small for a
    /// weighted variance (ess <= 1).
    #[error("effective sample size {ess} too small; weighted variance undefined")]
    EssTooSmall { ess: f64 },

    /// A caller-supplied value is outside the function's domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The subject-level dataset violates the expected schema.
    #[error("dataset schema error: {0}")]
    Schema(String),

    /// The analysis or study configuration is malformed.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code for the CLI: usage/schema/config problems exit 2,
    /// runtime failures exit 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Config(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }
}

/// Shorthand used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg(msg: impl Into<String>) -> Error {
    Error::invalid(msg)
}

/// Checks a finite-domain precondition, returning `InvalidArgument` on failure.
macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !($cond) {
            return Err($crate::error::invalid_arg(format!($($msg)*)));
        }
    };
}
pub(crate) use ensure;
