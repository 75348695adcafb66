//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by parameter validation, geometry, sampling and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A function was called outside its mathematical domain.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Partition or hierarchy geometry cannot be built for the given sizes.
    #[error("infeasible geometry: {0}")]
    Geometry(String),

    /// Problem size exceeds a hard limit of an exact routine.
    #[error("too large: {0}")]
    TooLarge(String),

    /// A lookup referenced a vertex, block or pair that does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// Malformed or truncated serialized data.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable kind tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Domain(_) => "domain",
            Error::Geometry(_) => "geometry",
            Error::TooLarge(_) => "too_large",
            Error::NotFound(_) => "not_found",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    /// Name of the offending parameter, when there is one.
    pub fn parameter(&self) -> Option<&str> {
        match self {
            Error::InvalidParameter { name, .. } => Some(name),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
