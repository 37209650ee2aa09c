use std::path::PathBuf;

use thiserror::Error;

use crate::query::QueryParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the library.
///
/// Variants are grouped by kind rather than by module so callers (the CLI in
/// particular) can map them onto stable exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed structured input. `line` is 1-based when known.
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    /// Binary embedding file with a bad header.
    #[error("format error: {0}")]
    Format(String),

    /// Declared record count or dimension disagrees with the payload length.
    #[error("truncation error: {0}")]
    Truncated(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("range error: {0}")]
    Range(String),

    /// A set, class or sentence name that does not resolve.
    #[error("unknown name: {0}")]
    Name(String),

    #[error(transparent)]
    Query(#[from] QueryParseError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
