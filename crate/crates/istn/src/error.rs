use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed file contents (wrong magic number, bad header).
    #[error("format error: {0}")]
    Format(String),
    /// Payload shorter or longer than the header declares.
    #[error("length error: {0}")]
    Length(String),
    /// Tensor/grid dimensions do not chain.
    #[error("shape error: {0}")]
    Shape(String),
    /// Invalid parameter value (spacing, stride, keep-rate, ...).
    #[error("parameter error: {0}")]
    Param(String),
    /// Invalid configuration (unknown task, unsupported dim, bad grid axes).
    #[error("config error: {0}")]
    Config(String),
    /// Non-finite values where finite ones are required.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Degenerate input (empty foreground, vanishing skeleton).
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Requested sizes exceed what is available.
    #[error("size error: {0}")]
    Size(String),
    /// A required artifact (checkpoint, dataset, trained model) is missing.
    #[error("dependency error: {0}")]
    Dependency(String),
    /// Mismatched metrics or other cross-value contract violations.
    #[error("contract error: {0}")]
    Contract(String),
    /// Precondition violation on an operation input.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Training diverged or produced non-finite losses.
    #[error("training failure: {0}")]
    Training(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
