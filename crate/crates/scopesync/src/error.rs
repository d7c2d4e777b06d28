//! Crate-wide error type.
//!
//! Variants are grouped by how callers are expected to react: usage-level
//! problems (`InvalidArgument`), estimation quality (`DegenerateFit`,
//! `LowConfidence`, `UndefinedCorrelation`) and data/store problems
//! (`Format`, `Conflict`, `Inconsistent`, `Io`, `Json`).

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The least-squares design matrix is rank deficient (e.g. all samples
    /// at the same phase).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A fit exists but its amplitude does not dominate the residual, so a
    /// phase read off it would be noise.
    #[error("low-confidence fit: {0}")]
    LowConfidence(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Malformed on-disk data; points at the offending file and line.
    #[error("format error in {path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("dataset inconsistency: {0}")]
    Inconsistent(String),

    #[error("empty overlap after trimming")]
    EmptyOverlap,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
