use std::path::PathBuf;

use thermosig_core::{FitError, IngestError, SynthError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Degenerate(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } | Self::Ingest(_) => 1,
            Self::Config(_) => 2,
            Self::Degenerate(_) => 3,
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::EmptySystem => Self::Degenerate(
                "no usable frames in the selected HVAC modes (by default only refrigerator frames are fitted)".into(),
            ),
            FitError::InvalidGrid(msg) => Self::Config(format!("grid: {msg}")),
            other => Self::Degenerate(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidScenario(msg) => Self::Config(format!("scenario: {msg}")),
            SynthError::Io(source) => Self::Io {
                path: PathBuf::from("dataset.csv"),
                source,
            },
            SynthError::Ingest(e) => Self::Ingest(e),
            other => Self::Config(format!("scenario: {other}")),
        }
    }
}
