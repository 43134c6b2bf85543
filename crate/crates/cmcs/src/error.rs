//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CmcsError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown node id: {0}")]
    UnknownNode(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("instance too large: {0}")]
    TooLarge(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, CmcsError>;
