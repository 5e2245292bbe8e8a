use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CrowdingError>;

#[derive(Debug, Error)]
pub enum CrowdingError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing required column(s): {}", missing.join(", "))]
    MissingColumns { path: PathBuf, missing: Vec<String> },

    #[error("rejected record: {0}")]
    RejectedRecord(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("panels are not on the same (stock, date) grid")]
    GridMismatch,

    #[error("length mismatch: {left} signs vs {right} volumes")]
    LengthMismatch { left: usize, right: usize },

    #[error("power-law fit needs at least {needed} positive points in range, found {found}")]
    FitFailure { needed: usize, found: usize },

    #[error("block reshuffle needs at least 2 blocks, got {blocks} (len {len}, block {block_len})")]
    TooFewBlocks {
        blocks: usize,
        len: usize,
        block_len: usize,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("missing upstream artifact {path}: run `crowding {producer}` first")]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CrowdingError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CrowdingError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        CrowdingError::Csv {
            path: path.into(),
            source,
        }
    }
}
