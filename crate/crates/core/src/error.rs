use thiserror::Error;

/// Errors raised by channel construction, verification and decomposition.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unphysical Bloch vector: norm {norm} exceeds 1")]
    Unphysical { norm: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("map is not completely positive (minimum Choi eigenvalue {min_eigenvalue:e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("internal consistency failure: {0}")]
    Consistency(String),

    #[error("unsupported decomposition target: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
