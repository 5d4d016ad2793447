use std::path::PathBuf;

use thiserror::Error;

use crate::job::JobState;

pub type Result<T, E = CurationError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("job {0} not found")]
    NotFound(String),

    #[error("frame {k} is outside the {n}-frame window of job {id}")]
    FrameOutOfRange { id: String, k: usize, n: usize },

    #[error("job {id} is {state}, {operation} is not allowed")]
    WrongState {
        id: String,
        state: JobState,
        operation: &'static str,
    },

    #[error("{path} holds {available} frames, {needed} needed")]
    InsufficientFrames {
        path: PathBuf,
        available: usize,
        needed: usize,
    },

    #[error("timed out waiting for job {0}")]
    Timeout(String),

    #[error(transparent)]
    Core(#[from] rainfree::Error),
}

impl CurationError {
    pub fn tag(&self) -> &'static str {
        match self {
            CurationError::NotFound(_) | CurationError::FrameOutOfRange { .. } => "not_found",
            CurationError::WrongState { .. } => "wrong_state",
            CurationError::InsufficientFrames { .. } => "insufficient_frames",
            CurationError::Timeout(_) => "timeout",
            CurationError::Core(e) => e.tag(),
        }
    }
}

pub(crate) fn io(path: impl Into<PathBuf>, e: std::io::Error) -> CurationError {
    CurationError::Core(rainfree::Error::io(path, e))
}
