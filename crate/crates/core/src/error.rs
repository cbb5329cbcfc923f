use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("covariance matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("eigen cache is stale: decomposed revision {cache}, distribution revision {dist}")]
    StaleCache { cache: u64, dist: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("population does not match the last ask: {0}")]
    PopulationMismatch(String),

    #[error("archive holds {available} samples, {required} required")]
    ArchiveTooSmall { available: usize, required: usize },

    #[error("degenerate training set: every chain constraint has a zero kernel difference")]
    DegenerateKernel,

    #[error("drift error needs at least 2 test points, got {0}")]
    TooFewTestPoints(usize),

    #[error("budget {budget} is smaller than the warm-up requirement {required}")]
    BudgetTooSmall { budget: usize, required: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
