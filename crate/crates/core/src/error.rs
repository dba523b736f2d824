use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum FloralError {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("random field error: {0}")]
    RandomField(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<FloralError>,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("integrator error: {0}")]
    Integrator(String),

    #[error("ensemble member {member}: {source}")]
    Member {
        member: usize,
        #[source]
        source: Box<FloralError>,
    },

    #[error("autograd error: {0}")]
    Autograd(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FloralError>;
