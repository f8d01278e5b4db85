use thiserror::Error;

/// Everything that can go wrong inside the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("numeric error in {what}: achieved residual {residual:e}")]
    Numeric { what: String, residual: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("circulant embedding is not nonnegative definite (min eigenvalue {min_eigenvalue:e} at size {size})")]
    Embedding { min_eigenvalue: f64, size: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    #[error("admissibility chain violated at stage {stage}: {detail}")]
    Admissibility { stage: usize, detail: String },

    #[error("inconsistent results: {0}")]
    Inconsistency(String),

    #[error("event too rare for naive Monte Carlo: {0}")]
    TooRare(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
