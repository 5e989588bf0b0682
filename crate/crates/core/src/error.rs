use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mesh ingestion failed: {0}")]
    Ingestion(String),

    #[error("invalid coefficients: {0}")]
    CoefficientValidity(String),

    #[error("unknown problem {0}")]
    UnknownProblem(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("size {size} exceeds limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
