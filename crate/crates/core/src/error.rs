//! Error type shared by every module in the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data: dimension mismatches, bad
    /// indices, files that do not parse.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value outside its admissible range.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Numeric failure: a matrix that must be positive definite is not, or
    /// the eigensolver did not converge.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
