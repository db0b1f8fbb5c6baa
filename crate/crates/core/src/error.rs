use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An index beyond a tabulated operator.
    #[error("index {index} out of range for a table of {len} singular values")]
    OutOfRange { index: usize, len: usize },

    /// Argument outside the domain of a formula (e.g. `log log n` for `n <= e`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A quantity that should be finite was not.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::OutOfRange { .. } | Error::Domain(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io { .. } | Error::Serde(_) | Error::Csv(_) => 4,
        }
    }
}
