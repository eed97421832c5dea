use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, FslmError>;

#[derive(Debug, Error)]
pub enum FslmError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid domain: start {start} must be strictly below end {end}")]
    InvalidDomain { start: f64, end: f64 },

    #[error("evaluation point {t} lies outside the domain [{start}, {end}]")]
    OutsideDomain { t: f64, start: f64, end: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("self-loop at unit {0}: contiguity weights require w_ii = 0")]
    SelfLoop(usize),

    #[error("unit index {index} out of range for {n} units")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("I - rho W is singular or has non-positive determinant at rho = {rho}")]
    Singular { rho: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("chain has no draws after burn-in")]
    EmptyChain,

    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<FslmError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FslmError {
    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            FslmError::RankDeficient(_)
            | FslmError::NotPositiveDefinite(_)
            | FslmError::Singular { .. }
            | FslmError::Degenerate(_)
            | FslmError::EmptyChain => true,
            FslmError::Sampler { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FslmError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        FslmError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
