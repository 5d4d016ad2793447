//! Temporal background estimation by mode and global percentile selection.
//!
//! Every (x, y, channel) site has a temporal trace. Its mode is the most
//! frequent intensity, and the mode's *span* is the set of percentile ranks
//! whose nearest-rank sample equals the mode. One percentile `p_hat` is then
//! chosen for the whole image: the rank that lies inside the largest number
//! of spans. The background is the `p_hat`-rank value of every trace.
//!
//! Rain only brightens pixels, so ties (in the mode and in `p_hat`) go to
//! the darker / lower candidate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, PixelTrace, Sequence};

/// Number of integer percentile ranks, `0..=100`.
pub const RANKS: usize = 101;

/// Mode of a trace and how many samples fall below and above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeStats {
    pub mode: u8,
    pub mode_count: u32,
    /// Samples strictly below the mode.
    pub below: u32,
    /// Samples strictly above the mode.
    pub above: u32,
    /// Trace length.
    pub n: u32,
}

impl ModeStats {
    /// Percent of samples strictly below the mode.
    pub fn r_min(&self) -> f64 {
        100.0 * self.below as f64 / self.n as f64
    }

    /// Percent of samples strictly above the mode.
    pub fn r_max(&self) -> f64 {
        100.0 * self.above as f64 / self.n as f64
    }

    pub fn span(&self) -> ModeSpan {
        mode_span(self)
    }
}

/// Half-open percentile interval `(low, high]` on which the nearest-rank
/// value of a trace equals its mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpan {
    pub low: f64,
    pub high: f64,
    below: u32,
    at_or_below: u32,
    n: u32,
}

impl ModeSpan {
    /// Whether integer rank `p` lies in `(low, high]`. Exact (integer) test.
    pub fn contains(&self, p: u8) -> bool {
        let scaled = p as u64 * self.n as u64;
        scaled > 100 * self.below as u64 && scaled <= 100 * self.at_or_below as u64
    }

    /// Inclusive range of integer ranks inside the span, if any.
    pub fn integer_ranks(&self) -> Option<(u8, u8)> {
        let n = self.n as u64;
        let first = 100 * self.below as u64 / n + 1;
        let last = 100 * self.at_or_below as u64 / n;
        (first <= last).then_some((first as u8, last as u8))
    }
}

/// Tally of sites per integer percentile rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PercentileVote {
    pub counts: Vec<u64>,
}

impl PercentileVote {
    fn from_diff(diff: &[i64; RANKS + 1]) -> Self {
        let mut running = 0i64;
        let counts = diff[..RANKS]
            .iter()
            .map(|d| {
                running += d;
                running as u64
            })
            .collect();
        Self { counts }
    }

    /// Highest-count rank, smallest rank on ties.
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for (p, &count) in self.counts.iter().enumerate() {
            if count > self.counts[best] {
                best = p;
            }
        }
        best as u8
    }
}

/// An estimated clean background and the statistics that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateClean {
    pub image: Frame,
    pub p_hat: u8,
    /// Fraction of sites whose mode span contains `p_hat`.
    pub coverage: f64,
    pub n_used: usize,
    pub vote: PercentileVote,
}

/// JSON sidecar written next to an estimated `clean.png`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSidecar {
    pub p_hat: u8,
    pub coverage: f64,
    pub n_used: usize,
    pub vote_counts: Vec<u64>,
}

impl CandidateClean {
    pub fn sidecar(&self) -> CandidateSidecar {
        CandidateSidecar {
            p_hat: self.p_hat,
            coverage: self.coverage,
            n_used: self.n_used,
            vote_counts: self.vote.counts.clone(),
        }
    }
}

/// Most frequent value of a trace (lowest value on ties) with its
/// below/above counts.
pub fn compute_mode(trace: &PixelTrace) -> Result<ModeStats> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("pixel trace"));
    }
    let mut hist = [0u32; 256];
    Ok(mode_of_samples(trace.samples(), &mut hist))
}

/// `hist` must be all-zero on entry and is left all-zero on exit.
#[inline]
fn mode_of_samples(samples: &[u8], hist: &mut [u32; 256]) -> ModeStats {
    let mut mode = 0u8;
    let mut mode_count = 0u32;
    for &v in samples {
        let c = &mut hist[v as usize];
        *c += 1;
        if *c > mode_count || (*c == mode_count && v < mode) {
            mode = v;
            mode_count = *c;
        }
    }
    let mut below = 0u32;
    for &v in samples {
        below += (v < mode) as u32;
        hist[v as usize] = 0;
    }
    let n = samples.len() as u32;
    ModeStats {
        mode,
        mode_count,
        below,
        above: n - below - mode_count,
        n,
    }
}

/// Percentile ranks `(r_min, 100 - r_max]` at which the nearest-rank value
/// equals the mode.
pub fn mode_span(stats: &ModeStats) -> ModeSpan {
    ModeSpan {
        low: stats.r_min(),
        high: 100.0 - stats.r_max(),
        below: stats.below,
        at_or_below: stats.n - stats.above,
        n: stats.n,
    }
}

/// Votes every site's span onto the integer ranks `0..=100` and returns the
/// most-voted rank. An empty field votes nothing and yields rank 0.
pub fn select_global_percentile(stats_field: &[ModeStats]) -> (u8, PercentileVote) {
    let mut diff = [0i64; RANKS + 1];
    for stats in stats_field {
        add_span(&mut diff, stats);
    }
    let vote = PercentileVote::from_diff(&diff);
    (vote.argmax(), vote)
}

#[inline]
fn add_span(diff: &mut [i64; RANKS + 1], stats: &ModeStats) {
    if let Some((first, last)) = mode_span(stats).integer_ranks() {
        diff[first as usize] += 1;
        diff[last as usize + 1] -= 1;
    }
}

/// 1-based nearest rank `max(1, ceil(p * n / 100))`.
#[inline]
pub fn nearest_rank(p: u8, n: usize) -> usize {
    (p as usize * n).div_ceil(100).max(1)
}

/// Nearest-rank percentile of a trace.
pub fn value_at_percentile(trace: &PixelTrace, p: u8) -> Result<u8> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("pixel trace"));
    }
    if p > 100 {
        return Err(Error::Parameter(format!("percentile {p} > 100")));
    }
    let mut sorted = trace.samples().to_vec();
    sorted.sort_unstable();
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

/// Mode statistics of every site in flat offset order.
pub fn stats_field(seq: &Sequence) -> Vec<ModeStats> {
    let mut hist = [0u32; 256];
    (0..seq.sites())
        .map(|site| mode_of_samples(seq.trace_at(site).samples(), &mut hist))
        .collect()
}

/// Sites per work block. Large enough to amortise gathering, small enough
/// that the transposed block stays in cache.
const BLOCK_SITES: usize = 2048;

/// Runs the estimator on whole sequences.
///
/// `threads` only changes speed; outputs are bit-identical for any value.
#[derive(Debug, Clone, Default)]
pub struct Estimator {
    pub threads: Option<usize>,
}

impl Estimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads: Some(threads),
        }
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            None => Ok(job()),
            Some(0) => Err(Error::Parameter("thread count must be at least 1".into())),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }

    /// Mode, global percentile vote, then the `p_hat`-rank value per site.
    pub fn estimate(&self, seq: &Sequence) -> Result<CandidateClean> {
        self.run(|| estimate_blocked(seq))
    }

    /// Per-site temporal mode with no global smoothing.
    pub fn mode_filter(&self, seq: &Sequence) -> Result<Frame> {
        self.run(|| mode_filter_blocked(seq))?
    }
}

pub fn estimate_background(seq: &Sequence) -> Result<CandidateClean> {
    Estimator::new().estimate(seq)
}

pub fn mode_filter_baseline(seq: &Sequence) -> Result<Frame> {
    Estimator::new().mode_filter(seq)
}

/// Copies the traces of sites `start..start + len` into `buf`, one
/// contiguous run of `n` samples per site.
#[inline]
fn gather(seq: &Sequence, start: usize, len: usize, buf: &mut Vec<u8>) {
    let n = seq.len();
    buf.resize(len * n, 0);
    for (k, frame) in seq.frames().iter().enumerate() {
        let src = &frame.data()[start..start + len];
        for (s, &v) in src.iter().enumerate() {
            buf[s * n + k] = v;
        }
    }
}

fn estimate_blocked(seq: &Sequence) -> CandidateClean {
    let sites = seq.sites();
    let n = seq.len();

    let diff = (0..sites.div_ceil(BLOCK_SITES))
        .into_par_iter()
        .map_init(
            || (Vec::new(), [0u32; 256]),
            |(buf, hist), block| {
                let start = block * BLOCK_SITES;
                let len = BLOCK_SITES.min(sites - start);
                gather(seq, start, len, buf);
                let mut diff = [0i64; RANKS + 1];
                for trace in buf.chunks_exact(n) {
                    add_span(&mut diff, &mode_of_samples(trace, hist));
                }
                diff
            },
        )
        .reduce(
            || [0i64; RANKS + 1],
            |mut a, b| {
                a.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += y);
                a
            },
        );
    let vote = PercentileVote::from_diff(&diff);
    let p_hat = vote.argmax();
    let rank = nearest_rank(p_hat, n) - 1;

    let mut out = vec![0u8; sites];
    out.par_chunks_mut(BLOCK_SITES)
        .enumerate()
        .for_each_init(Vec::new, |buf, (block, dst)| {
            gather(seq, block * BLOCK_SITES, dst.len(), buf);
            for (trace, px) in buf.chunks_exact_mut(n).zip(dst.iter_mut()) {
                *px = *trace.select_nth_unstable(rank).1;
            }
        });

    let first = &seq.frames()[0];
    let image = Frame::new(first.width(), first.height(), first.channels(), out)
        .expect("output shape matches input");
    CandidateClean {
        image,
        p_hat,
        coverage: vote.counts[p_hat as usize] as f64 / sites as f64,
        n_used: n,
        vote,
    }
}

fn mode_filter_blocked(seq: &Sequence) -> Result<Frame> {
    let sites = seq.sites();
    let n = seq.len();
    let mut out = vec![0u8; sites];
    out.par_chunks_mut(BLOCK_SITES)
        .enumerate()
        .for_each_init(
            || (Vec::new(), [0u32; 256]),
            |(buf, hist), (block, dst)| {
                gather(seq, block * BLOCK_SITES, dst.len(), buf);
                for (trace, px) in buf.chunks_exact(n).zip(dst.iter_mut()) {
                    *px = mode_of_samples(trace, hist).mode;
                }
            },
        );
    let first = &seq.frames()[0];
    Frame::new(first.width(), first.height(), first.channels(), out)
}
