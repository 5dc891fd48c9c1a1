use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented memory or size ceiling would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Exact arithmetic left the representable range. Never wrapped silently.
    #[error("arithmetic overflow: {0}")]
    Overflow(String),

    /// Malformed spec text, flag value or report.
    #[error("parse error: {0}")]
    Parse(String),

    /// Checkpoint file is unusable for the requested job.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
