//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used by every fallible function in the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file. `line` is 1-based; 0 means the position is not
    /// tied to a single line.
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Input that parsed but violates a structural requirement.
    #[error("validation error: {0}")]
    Validation(String),

    /// Design or contrast matrix without the required rank.
    #[error("rank error: {0}")]
    Rank(String),

    /// A numerical impossibility was observed, e.g. a clearly negative extra
    /// sum of squares. Indicates a bug or a pathological input.
    #[error("numerical inconsistency: {0}")]
    Numerical(String),

    /// Two pipeline stages were run against different permutation plans.
    #[error("plan mismatch: {0}")]
    PlanMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn parse(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}
