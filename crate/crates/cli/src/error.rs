use std::fmt;

use fh_core::FhError;

/// CLI failure categories mapped onto exit codes: config errors exit 2,
/// guard violations 3, integrity failures 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Guard(String),
    Integrity(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn integrity(msg: impl Into<String>) -> Self {
        CliError::Integrity(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Integrity(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Guard(msg) => write!(f, "guard violation: {msg}"),
            CliError::Integrity(msg) => write!(f, "integrity failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<FhError> for CliError {
    fn from(err: FhError) -> Self {
        match err {
            FhError::GuardExceeded(msg) => CliError::Guard(msg),
            FhError::Integrity(msg) => CliError::Integrity(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
