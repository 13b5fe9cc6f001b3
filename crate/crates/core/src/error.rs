use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (shapes, non-finite values, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// A numeric parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Both Frobenius norms must be nonzero for the normalized alignment.
    #[error("degenerate alignment: centered kernel has zero Frobenius norm")]
    DegenerateAlignment,

    /// A solver produced NaN or infinity.
    #[error("non-finite value in {context} at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        context: &'static str,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("every grid point failed ({0} attempted)")]
    AllGridPointsFailed(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
