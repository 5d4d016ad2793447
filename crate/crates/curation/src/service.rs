use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rainfree::frame::{count_frames, list_frames, load_sequence};
use rainfree::metrics::{rain_mask, DEFAULT_MASK_THRESHOLD};
use rainfree::{Estimator, Frame};

use crate::error::{io, CurationError, Result};
use crate::job::{
    rain_frame_index, CurationJob, Decision, DensityClass, HistoryEntry, JobState, JobSummary,
    PairMeta,
};
use crate::store::Store;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub state_dir: PathBuf,
    /// Finalized pairs land in `<dataset_dir>/<job id>/`.
    pub dataset_dir: PathBuf,
    pub mask_threshold: u8,
    /// Estimator threads; `None` uses every core.
    pub threads: Option<usize>,
}

impl ServiceConfig {
    pub fn new(state_dir: impl Into<PathBuf>) -> Self {
        let state_dir = state_dir.into();
        Self {
            dataset_dir: state_dir.join("dataset"),
            state_dir,
            mask_threshold: DEFAULT_MASK_THRESHOLD,
            threads: None,
        }
    }
}

struct Slot {
    job: Mutex<CurationJob>,
    settled: Condvar,
}

struct Inner {
    config: ServiceConfig,
    store: Store,
    jobs: Mutex<BTreeMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

/// The curation loop: jobs, background candidate generation and dataset
/// finalization.
///
/// Cheap to clone. Each job has its own lock, held only for bookkeeping and
/// never while a candidate is being estimated.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn parse_id(id: &str) -> Option<u64> {
    id.strip_prefix("job-")?.parse().ok()
}

impl Service {
    /// Opens (or creates) the state directory and resumes any job that was
    /// still generating when the previous process stopped.
    pub fn open(config: ServiceConfig) -> Result<Self> {
        let store = Store::open(&config.state_dir)?;
        let jobs = store.load_all()?;
        let next = jobs.iter().filter_map(|j| parse_id(&j.id)).max().unwrap_or(0) + 1;
        let service = Service {
            inner: Arc::new(Inner {
                config,
                store,
                jobs: Mutex::new(BTreeMap::new()),
                next_id: AtomicU64::new(next),
            }),
        };
        for job in jobs {
            let resume = (job.state == JobState::Generating).then_some(job.current_n);
            let id = job.id.clone();
            let slot = Arc::new(Slot {
                job: Mutex::new(job),
                settled: Condvar::new(),
            });
            lock(&service.inner.jobs).insert(id, Arc::clone(&slot));
            if let Some(n) = resume {
                service.spawn_generation(slot, n);
            }
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.inner.config
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        lock(&self.inner.jobs)
            .get(id)
            .cloned()
            .ok_or_else(|| CurationError::NotFound(id.to_string()))
    }

    pub fn create_job(&self, sequence_ref: impl AsRef<Path>, density: DensityClass) -> Result<CurationJob> {
        let sequence_ref = sequence_ref.as_ref().to_path_buf();
        let available = count_frames(&sequence_ref)?;
        let n = density.initial_n();
        if available < n {
            return Err(CurationError::InsufficientFrames {
                path: sequence_ref,
                available,
                needed: n,
            });
        }
        let id = format!("job-{:06}", self.inner.next_id.fetch_add(1, Ordering::SeqCst));
        let job = CurationJob {
            id: id.clone(),
            sequence_ref,
            density,
            current_n: n,
            state: JobState::Generating,
            history: Vec::new(),
            candidate: None,
            available_frames: available,
            created_ms: now_ms(),
            failure: None,
        };
        self.inner.store.save(&job)?;
        let slot = Arc::new(Slot {
            job: Mutex::new(job.clone()),
            settled: Condvar::new(),
        });
        lock(&self.inner.jobs).insert(id, Arc::clone(&slot));
        self.spawn_generation(slot, n);
        Ok(job)
    }

    fn spawn_generation(&self, slot: Arc<Slot>, n: usize) {
        let inner = Arc::clone(&self.inner);
        let (id, sequence_ref) = {
            let job = lock(&slot.job);
            (job.id.clone(), job.sequence_ref.clone())
        };
        std::thread::spawn(move || {
            let outcome = generate(&inner, &id, &sequence_ref, n);
            let mut job = lock(&slot.job);
            if job.state != JobState::Generating || job.current_n != n {
                return;
            }
            let mut next = job.clone();
            match outcome {
                Ok(sidecar) => {
                    next.state = JobState::NeedsReview;
                    next.candidate = Some(sidecar);
                }
                Err(e) => {
                    next.state = JobState::Exhausted;
                    next.failure = Some(e.to_string());
                }
            }
            if let Err(e) = inner.store.save(&next) {
                next.failure = Some(e.to_string());
            }
            *job = next;
            slot.settled.notify_all();
        });
    }

    pub fn decide(&self, id: &str, decision: Decision) -> Result<CurationJob> {
        let slot = self.slot(id)?;
        let mut job = lock(&slot.job);
        if job.state != JobState::NeedsReview {
            return Err(CurationError::WrongState {
                id: id.to_string(),
                state: job.state,
                operation: "decide",
            });
        }
        let mut next = job.clone();
        next.history.push(HistoryEntry {
            n: job.current_n,
            decision,
            timestamp_ms: now_ms(),
        });
        let regenerate = match decision {
            Decision::Accept => {
                self.finalize(&next)?;
                next.state = JobState::Accepted;
                false
            }
            Decision::Reject => {
                let wanted = next.current_n + next.density.increment();
                next.available_frames = count_frames(&next.sequence_ref)?;
                next.candidate = None;
                if next.available_frames >= wanted {
                    next.current_n = wanted;
                    next.state = JobState::Generating;
                    true
                } else {
                    next.state = JobState::Exhausted;
                    false
                }
            }
        };
        self.inner.store.save(&next)?;
        *job = next.clone();
        drop(job);
        if regenerate {
            self.spawn_generation(slot, next.current_n);
        }
        Ok(next)
    }

    /// Writes `rain.png`, `clean.png`, `mask.png` and `meta.json` for an
    /// accepted job.
    fn finalize(&self, job: &CurationJob) -> Result<()> {
        let n = job.current_n;
        let index = rain_frame_index(n);
        let frames = list_frames(&job.sequence_ref)?;
        let path = frames.get(index).ok_or_else(|| CurationError::InsufficientFrames {
            path: job.sequence_ref.clone(),
            available: frames.len(),
            needed: n,
        })?;
        let rain = Frame::open(path)?;
        let clean = Frame::from_png_bytes(&self.inner.store.candidate_bytes(&job.id)?)?;
        let threshold = self.inner.config.mask_threshold;
        let mask = rain_mask(&rain, &clean, threshold)?;
        let sidecar = job
            .candidate
            .as_ref()
            .expect("a job under review always carries candidate statistics");
        let meta = PairMeta {
            p_hat: sidecar.p_hat,
            coverage: sidecar.coverage,
            n_used: sidecar.n_used,
            rain_frame_index: index,
            density: job.density,
            mask_threshold: threshold,
        };
        let dir = self.pair_dir(&job.id);
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        rain.save_png(dir.join("rain.png"))?;
        clean.save_png(dir.join("clean.png"))?;
        mask.to_frame().save_png(dir.join("mask.png"))?;
        let meta_path = dir.join("meta.json");
        let text = serde_json::to_vec_pretty(&meta).map_err(rainfree::Error::from)?;
        fs::write(&meta_path, text).map_err(|e| io(&meta_path, e))
    }

    pub fn pair_dir(&self, id: &str) -> PathBuf {
        self.inner.config.dataset_dir.join(id)
    }

    pub fn job(&self, id: &str) -> Result<CurationJob> {
        Ok(lock(&self.slot(id)?.job).clone())
    }

    pub fn list_jobs(&self) -> Vec<JobSummary> {
        let slots: Vec<_> = lock(&self.inner.jobs).values().cloned().collect();
        slots.iter().map(|s| lock(&s.job).summary()).collect()
    }

    /// PNG bytes of the current candidate.
    pub fn get_candidate(&self, id: &str) -> Result<Vec<u8>> {
        let slot = self.slot(id)?;
        let job = lock(&slot.job);
        if !job.state.has_candidate() {
            return Err(CurationError::WrongState {
                id: id.to_string(),
                state: job.state,
                operation: "get_candidate",
            });
        }
        self.inner.store.candidate_bytes(id)
    }

    /// PNG bytes of frame `k` of the job's current window.
    pub fn get_frame_sample(&self, id: &str, k: usize) -> Result<Vec<u8>> {
        let (sequence_ref, n) = {
            let job = self.job(id)?;
            (job.sequence_ref, job.current_n)
        };
        if k >= n {
            return Err(CurationError::FrameOutOfRange { id: id.to_string(), k, n });
        }
        let frames = list_frames(&sequence_ref)?;
        let path = frames
            .get(k)
            .ok_or_else(|| CurationError::FrameOutOfRange { id: id.to_string(), k, n: frames.len() })?;
        fs::read(path).map_err(|e| io(path, e))
    }

    /// Blocks until the job leaves `Generating`.
    pub fn wait_settled(&self, id: &str, timeout: Duration) -> Result<CurationJob> {
        let slot = self.slot(id)?;
        let job = lock(&slot.job);
        let (job, result) = slot
            .settled
            .wait_timeout_while(job, timeout, |j| j.state == JobState::Generating)
            .unwrap_or_else(|e| e.into_inner());
        if result.timed_out() {
            return Err(CurationError::Timeout(id.to_string()));
        }
        Ok(job.clone())
    }
}

fn generate(
    inner: &Inner,
    id: &str,
    sequence_ref: &Path,
    n: usize,
) -> Result<rainfree::estimator::CandidateSidecar> {
    let seq = load_sequence(sequence_ref, Some(n))?;
    let estimator = match inner.config.threads {
        Some(t) => Estimator::with_threads(t),
        None => Estimator::new(),
    };
    let candidate = estimator.estimate(&seq)?;
    inner.store.save_candidate(id, &candidate.image)?;
    Ok(candidate.sidecar())
}

/// Re-runs a recorded decision history as a new job on `service` and returns
/// the job in its final state.
pub fn replay_history(
    service: &Service,
    sequence_ref: impl AsRef<Path>,
    density: DensityClass,
    history: &[HistoryEntry],
    timeout: Duration,
) -> Result<CurationJob> {
    let mut job = service.create_job(sequence_ref, density)?;
    job = service.wait_settled(&job.id, timeout)?;
    for entry in history {
        if job.current_n != entry.n {
            return Err(CurationError::Core(rainfree::Error::Parameter(format!(
                "history expects a decision at n = {}, replay is at n = {}",
                entry.n, job.current_n
            ))));
        }
        job = service.decide(&job.id, entry.decision)?;
        job = service.wait_settled(&job.id, timeout)?;
    }
    Ok(job)
}
