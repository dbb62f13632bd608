use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the pipeline. Each variant maps to one error class and
/// one process exit code in the command-line driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("balancing error: {0}")]
    Balancing(String),

    #[error("localization error: {0}")]
    Localization(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("duplicate sample id `{0}` in manifest")]
    DuplicateId(String),

    #[error("malformed {what}: {reason}")]
    Malformed { what: String, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            what: what.into(),
            reason: reason.into(),
        }
    }

    /// Stable short code for the error class, used in reports and exit codes.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidArgument { .. } => "invalid-argument",
            Error::Config(_) => "config",
            Error::Balancing(_) => "balancing",
            Error::Localization(_) => "localization",
            Error::UndefinedMetric(_) => "undefined-metric",
            Error::Training(_) => "training",
            Error::Checkpoint(_) => "checkpoint",
            Error::MissingFile(_) => "missing-file",
            Error::DuplicateId(_) => "duplicate-id",
            Error::Malformed { .. } => "malformed",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
