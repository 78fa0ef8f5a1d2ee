use thiserror::Error;

/// Errors raised by the estimators, statistics and bootstrap machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group {0} has no subjects")]
    GroupEmpty(u8),
    #[error("all subjects are censored")]
    AllCensored,
    #[error("invalid observation time {time} for subject {index}")]
    InvalidTime { index: usize, time: f64 },
    #[error("weight argument {0} lies outside [0, 1]")]
    DomainError(f64),
    #[error("weight `{label}` is not usable: {reason}")]
    InvalidWeight { label: String, reason: String },
    #[error("shape mismatch: {0}")]
    ShapeError(String),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("variance estimate is zero for weight `{0}`")]
    DegenerateVariance(String),
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
