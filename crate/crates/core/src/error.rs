//! Error type shared by every module.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A dense construction would exceed the configured size guard.
    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    ConvergenceFailure {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("{name}: defect {defect:.3e} exceeds tolerance {tolerance:.1e}")]
    EncodingDefect {
        name: String,
        defect: f64,
        tolerance: f64,
    },

    #[error("requested normalization {requested} is below the natural value {natural}")]
    NormTooSmall { requested: f64, natural: f64 },

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConvergenceFailure { .. } => 3,
            Error::EncodingDefect { .. } => 4,
            Error::Io { .. } | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
