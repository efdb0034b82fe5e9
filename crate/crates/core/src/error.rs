use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("ingest failed: {0}")]
    Ingest(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid annotation for report {report_id}: {message}")]
    Annotation { report_id: String, message: String },

    #[error("invalid link candidates: {0}")]
    Candidates(String),

    #[error("duplicate report id {0}")]
    DuplicateReport(String),

    #[error("index is empty")]
    EmptyIndex,

    #[error("invalid harness plan: {0}")]
    Plan(String),

    #[error("label data mismatch: {0}")]
    Labels(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from user configuration rather than from the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
