use thiserror::Error;

/// Crate-wide error type. Kernel-level shape violations panic instead; these
/// variants cover recoverable configuration, I/O and run-time failures that
/// the CLI maps onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
