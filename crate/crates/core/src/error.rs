//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar argument fell outside the mathematical domain of an operation.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    /// Invalid parameter values (non-finite, non-positive, out of bounds).
    #[error("invalid parameter {name}: {msg}")]
    InvalidParam { name: &'static str, msg: String },

    /// A matrix was not positive definite even after the full jitter ladder.
    #[error("matrix not positive definite (pivot {pivot}, max jitter {max_jitter:.3e})")]
    NotPositiveDefinite { pivot: usize, max_jitter: f64 },

    /// Malformed input data (CSV rows, model files, corpora).
    #[error("parse error at {location}: {msg}")]
    Parse { location: String, msg: String },

    /// Model file failed structural validation.
    #[error("model format error: {0}")]
    ModelFormat(String),

    /// An iterative routine exhausted its budget without meeting its contract.
    #[error("{op} failed to converge: {msg}")]
    NoConvergence { op: &'static str, msg: String },

    /// Input collections are inconsistent with each other.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub(crate) fn invalid(name: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParam { name, msg: msg.into() }
    }

    pub(crate) fn parse(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse { location: location.into(), msg: msg.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
