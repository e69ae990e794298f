use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HkfError> = std::result::Result<T, E>;

/// Failure categories surfaced by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum HkfError {
    #[error("insufficient beats: {0}")]
    InsufficientBeats(String),
    #[error("invalid boundaries: {0}")]
    InvalidBoundaries(String),
    #[error("degenerate channel {channel}: zero signal power")]
    DegenerateChannel { channel: usize },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("index {index} out of range (valid 0..{len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("degenerate fit at intra index {t}")]
    DegenerateFit { t: usize },
    #[error("singular innovation covariance at index {t}")]
    SingularInnovation { t: usize },
    #[error("singular predicted covariance at index {t}")]
    SingularPrediction { t: usize },
    #[error("EM diverged at iteration {iteration}")]
    EmDiverged { iteration: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HkfError {
    /// Process exit status for the CLI: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            HkfError::InvalidParameter(_) | HkfError::Config(_) => 1,
            HkfError::InsufficientBeats(_)
            | HkfError::InvalidBoundaries(_)
            | HkfError::DegenerateChannel { .. }
            | HkfError::Dimension(_)
            | HkfError::IndexOutOfRange { .. }
            | HkfError::Parse { .. }
            | HkfError::Io { .. } => 2,
            HkfError::DegenerateFit { .. }
            | HkfError::SingularInnovation { .. }
            | HkfError::SingularPrediction { .. }
            | HkfError::EmDiverged { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HkfError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        HkfError::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
