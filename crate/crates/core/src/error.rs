use thiserror::Error;

/// Errors raised by the shrinkage library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("{0} is not symmetric positive definite")]
    NotSpd(String),

    #[error("sum of weight matrices is ill-conditioned (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("design matrix of group {0} is rank deficient")]
    RankDeficient(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: best estimate {estimate:e} with error {error:e}")]
    NoConvergence { estimate: f64, error: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
