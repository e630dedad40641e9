use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Error)]
pub enum FhError {
    /// Shapes or lengths of two values disagree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A scalar argument is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// DIMACS or config text could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An enumeration guard would be exceeded by the request.
    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    /// A stored artifact fails one of its structural invariants.
    #[error("integrity check failed: {0}")]
    Integrity(String),

    /// A NaN or infinity appeared where a finite number is required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, FhError>;
