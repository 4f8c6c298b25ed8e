use thiserror::Error;

/// Errors produced by the surrogate, criteria and experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate posterior: observation variance is zero")]
    DegeneratePosterior,

    #[error("noise variance is zero; use the noiseless (entropy maximization) branch")]
    DegenerateNoise,

    #[error("degenerate threshold vector: alpha must be positive (use BES-MP for alpha = 0)")]
    DegenerateThresholds,

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("hyperparameter fit failed: {0}")]
    FitFailure(String),

    #[error("acquisition optimizer failed: criterion is non-finite at every candidate")]
    OptimizerFailure,

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("function has zero variance on the probe grid")]
    ZeroVariance,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
