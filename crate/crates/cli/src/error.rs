use std::io;

use galois_core::diff::CheckpointError;
use galois_core::dsl::{ProgramError, SelectorError, SketchError};
use galois_core::gridworld::EnvError;
use galois_core::trainer::{ReuseError, TrainError};
use thiserror::Error;

/// Command failures, each with a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error("artifact mismatch: {0}")]
    Artifact(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerics(_) => 3,
            CliError::Artifact(_) => 4,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Env(EnvError::Config(_)) => CliError::Usage(e.to_string()),
            TrainError::Numerics(_) => CliError::Numerics(e.to_string()),
            TrainError::Sketch(s) => s.into(),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<SketchError> for CliError {
    fn from(e: SketchError) -> Self {
        match e {
            SketchError::Vocabulary(_) => CliError::Artifact(e.to_string()),
            SketchError::Env(EnvError::Config(_)) => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(_) => CliError::Usage(e.to_string()),
            other => CliError::Artifact(other.to_string()),
        }
    }
}

impl From<ProgramError> for CliError {
    fn from(e: ProgramError) -> Self {
        match e {
            ProgramError::Vocabulary(_) => CliError::Artifact(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<SelectorError> for CliError {
    fn from(e: SelectorError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ReuseError> for CliError {
    fn from(e: ReuseError) -> Self {
        match e {
            ReuseError::Checkpoint(c) => c.into(),
            ReuseError::Selector(s) => s.into(),
            other => CliError::Artifact(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}
