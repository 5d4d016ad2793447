use std::fmt;
use std::path::PathBuf;

use rainfree::estimator::CandidateSidecar;
use serde::{Deserialize, Serialize};

/// Operator judgment of how much rain a sequence shows. Fixes the frame
/// schedule for its jobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityClass {
    Sparse,
    Normal,
    Dense,
}

impl DensityClass {
    pub const ALL: [DensityClass; 3] = [DensityClass::Sparse, DensityClass::Normal, DensityClass::Dense];

    pub fn initial_n(self) -> usize {
        match self {
            DensityClass::Sparse => 20,
            DensityClass::Normal => 100,
            DensityClass::Dense => 200,
        }
    }

    pub fn increment(self) -> usize {
        match self {
            DensityClass::Sparse => 10,
            DensityClass::Normal => 20,
            DensityClass::Dense => 50,
        }
    }

    /// Frame count after `rejections` rejected candidates.
    pub fn n_after(self, rejections: usize) -> usize {
        self.initial_n() + rejections * self.increment()
    }

    /// True when `n` lies on this class's schedule.
    pub fn on_schedule(self, n: usize) -> bool {
        n >= self.initial_n() && (n - self.initial_n()) % self.increment() == 0
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DensityClass::Sparse => "sparse",
            DensityClass::Normal => "normal",
            DensityClass::Dense => "dense",
        }
    }
}

impl fmt::Display for DensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JobState {
    Generating,
    NeedsReview,
    Accepted,
    Exhausted,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Accepted | JobState::Exhausted)
    }

    pub fn has_candidate(self) -> bool {
        matches!(self, JobState::NeedsReview | JobState::Accepted)
    }
}

impl fmt::Display for JobState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// One human decision on the candidate built from `n` frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub n: usize,
    pub decision: Decision,
    pub timestamp_ms: u64,
}

/// Persisted state of one curation job.
///
/// The candidate image itself lives next to the JSON document; only its
/// statistics are stored inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurationJob {
    pub id: String,
    pub sequence_ref: PathBuf,
    pub density: DensityClass,
    pub current_n: usize,
    pub state: JobState,
    pub history: Vec<HistoryEntry>,
    pub candidate: Option<CandidateSidecar>,
    /// Frames found in `sequence_ref` at the last scheduling decision.
    pub available_frames: usize,
    pub created_ms: u64,
    /// Why generation stopped, when it failed rather than ran out of frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl CurationJob {
    pub fn summary(&self) -> JobSummary {
        JobSummary {
            id: self.id.clone(),
            density: self.density,
            current_n: self.current_n,
            state: self.state,
            decisions: self.history.len(),
            created_ms: self.created_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSummary {
    pub id: String,
    pub density: DensityClass,
    pub current_n: usize,
    pub state: JobState,
    pub decisions: usize,
    pub created_ms: u64,
}

/// `meta.json` of a finalized dataset pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub p_hat: u8,
    pub coverage: f64,
    pub n_used: usize,
    pub rain_frame_index: usize,
    pub density: DensityClass,
    pub mask_threshold: u8,
}

/// Index of the frame paired with the candidate: the middle of the window,
/// lower middle for even `n`.
pub fn rain_frame_index(n: usize) -> usize {
    n.saturating_sub(1) / 2
}
