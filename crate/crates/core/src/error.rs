//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
///
/// The variants map onto the failure classes the pipeline distinguishes:
/// bad arguments (`Domain`), incompatible objects (`Mismatch`, `Shape`),
/// malformed or non-finite data (`Data`), resource budgets (`Resource`)
/// and numeric contract violations such as a NaN produced mid-pipeline
/// (`NumericContract`).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numeric contract violation: {0}")]
    NumericContract(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn mismatch(msg: impl Into<String>) -> Self {
        Error::Mismatch(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}
