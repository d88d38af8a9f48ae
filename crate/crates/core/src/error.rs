use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    DegenerateLikelihood,
    Internal,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Internal => 1,
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::DegenerateLikelihood => 4,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("all log-weights are -inf or NaN{}", step.map(|k| format!(" at step {k}")).unwrap_or_default())]
    DegenerateLikelihood { step: Option<usize> },

    #[error("kernel density mass lies outside the domain ({accepted} accepted of {attempts} draws)")]
    KdeMassOutside { accepted: usize, attempts: usize },

    #[error("invalid scenario field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema error in {path} at line {line}: {message}")]
    Schema {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("detector `{detector}` has no reading at time {time_s} s")]
    Gap { detector: String, time_s: i64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a time step to a degenerate-likelihood error.
    pub(crate) fn at_step(self, k: usize) -> Self {
        match self {
            Error::DegenerateLikelihood { step: None } => Error::DegenerateLikelihood { step: Some(k) },
            other => other,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Parse { .. } | Error::InvalidArgument(_) => {
                ErrorCategory::Config
            }
            Error::Schema { .. } | Error::Gap { .. } | Error::LengthMismatch { .. } => {
                ErrorCategory::Data
            }
            Error::Io { .. } => ErrorCategory::Data,
            Error::DegenerateLikelihood { .. } => ErrorCategory::DegenerateLikelihood,
            Error::DegenerateInput(_) | Error::NonFinite(_) | Error::KdeMassOutside { .. } => {
                ErrorCategory::Internal
            }
        }
    }
}
