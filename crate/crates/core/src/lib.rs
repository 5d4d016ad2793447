//! Rain-free background plates from image sequences of a static scene.
//!
//! The crate is organised by capability:
//!
//! - [`frame`]: 8-bit frames, sequences on disk and per-pixel temporal traces.
//! - [`estimator`]: per-site temporal mode, mode percentile spans and a global
//!   percentile vote that yields a smooth clean background.
//! - [`synth`]: synthetic rain over a known clean plate, used as ground truth.
//! - [`metrics`]: PSNR, SSIM, rain masks and the training losses as plain
//!   evaluation functions.
//! - [`sam`]: a small-scale spatial attention kernel built on four-directional
//!   IRNN scans, with analytic gradients and a finite-difference checker.

pub mod error;
pub mod estimator;
pub mod frame;
pub mod metrics;
pub mod sam;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use estimator::{
    compute_mode, estimate_background, mode_filter_baseline, mode_span, select_global_percentile,
    value_at_percentile, CandidateClean, Estimator, ModeSpan, ModeStats, PercentileVote,
};
pub use frame::{load_sequence, Frame, PixelTrace, Sequence};
pub use metrics::{
    apply_residual, attention_loss, psnr, rain_mask, ssim, total_loss, AttentionMap, LossBreakdown,
    RainMask, SsimParams,
};
pub use sam::{
    attention_gate, directional_scan, directional_scan_grad, gradcheck, two_round_irnn, Direction,
    DirectionalWeights, MixWeights, SamParams, TensorMap,
};
pub use synth::{synth_sequence, synth_streak_layer, RainStreakParams, SynthGroundTruth};
