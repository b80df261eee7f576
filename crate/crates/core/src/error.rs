use std::path::PathBuf;

use thiserror::Error;

use crate::dissemination::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row or header in a CSV input could not be accepted. `line` is 1-based
    /// and counts the header row.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid trust thresholds: need 0 <= acquaintance ({acquaintance}) < friend ({friend}) <= 1")]
    InvalidThresholds { friend: f64, acquaintance: f64 },

    #[error("hour {0} out of range 0..24")]
    HourOutOfRange(u32),

    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error(transparent)]
    Wire(#[from] WireError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        source_name: impl Into<String>,
        line: u64,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }
}
