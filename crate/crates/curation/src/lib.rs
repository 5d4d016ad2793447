//! Human-supervised curation of rain-free background plates.
//!
//! A job walks a sequence through a density-dependent frame schedule: build a
//! candidate from the first `n` frames, let a reviewer accept or reject it,
//! and on rejection retry with more frames. Accepted jobs become
//! `(rain, clean, mask, meta)` pairs on disk.

pub mod error;
pub mod http;
pub mod job;
pub mod service;
mod store;

pub use error::{CurationError, Result};
pub use job::{
    rain_frame_index, CurationJob, Decision, DensityClass, HistoryEntry, JobState, JobSummary, PairMeta,
};
pub use service::{replay_history, Service, ServiceConfig};
