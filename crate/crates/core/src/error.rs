use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("truncated EPOS record at byte offset {offset} (stream length {len} is not a multiple of 44)")]
    TruncatedRecord { offset: usize, len: usize },

    #[error("non-finite value in EPOS record {record} field `{field}`")]
    NonFinite { record: usize, field: &'static str },

    #[error("range file line {line}: {message}")]
    RangeSyntax { line: usize, message: String },

    #[error("range validation: {0}")]
    RangeValidation(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("no qualifying fringe peak (peak/median ratio {ratio:.2} < {threshold})")]
    NoFringe { ratio: f64, threshold: f64 },

    #[error("{0}")]
    Analysis(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image: {0}")]
    Image(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn analysis(msg: impl Into<String>) -> Self {
        Error::Analysis(msg.into())
    }

    /// True for unreadable or malformed files and config, as opposed to
    /// failures of the analysis itself.
    pub fn is_io_or_config(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::Image(_)
                | Error::TruncatedRecord { .. }
                | Error::NonFinite { .. }
                | Error::RangeSyntax { .. }
                | Error::RangeValidation(_)
        )
    }
}
