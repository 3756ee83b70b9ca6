use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation horizon {horizon:.3e} exceeds the cap of {cap:.0e}")]
    HorizonTooLarge { horizon: f64, cap: f64 },

    #[error("driver horizon {available} is shorter than the required {required}")]
    HorizonInsufficient { required: f64, available: f64 },

    #[error("removable singularity: mean Hurst exponent {h_mean} is within {tol:e} of 1/2")]
    RemovableSingularity { h_mean: f64, tol: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("circulant embedding failed and no fallback is available")]
    EmbeddingFailed,

    #[error("insufficient grid resolution: {0}")]
    InsufficientResolution(String),

    #[error("range violation: {0}")]
    Range(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
