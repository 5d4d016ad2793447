//! Synthetic rain over a known clean plate.
//!
//! Streaks are anti-aliased capsules composited additively (and clamped at
//! 255), so a rain-covered sample is never darker than the clean plate. Each
//! site is covered in at most `coverage_cap * n` frames; placements that would
//! exceed the cap are re-drawn.
//!
//! Randomness is keyed by `(seed, frame_index)`: every frame draws from its
//! own ChaCha stream, so results do not depend on generation order.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, Sequence};
use crate::metrics::RainMask;

/// Re-draws allowed per requested streak before a frame is declared infeasible.
pub const MAX_DRAWS_PER_STREAK: usize = 64;

/// Streak geometry, density and noise. Serialized as the `params.json` of a
/// synthetic sequence; omitted keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RainStreakParams {
    /// Degrees from vertical, in `[-45, 45]`.
    pub direction: f64,
    /// Streak length in pixels (pixel centres covered along the axis).
    pub length: f64,
    /// Streak width in pixels.
    pub width: f64,
    /// Brightness added at the streak core.
    pub intensity_gain: u8,
    pub streaks_per_frame: u32,
    /// Maximum fraction of frames in which any one site may be covered.
    pub coverage_cap: f64,
    /// Standard deviation of additive Gaussian sensor noise, in intensity units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for RainStreakParams {
    fn default() -> Self {
        Self {
            direction: 10.0,
            length: 15.0,
            width: 1.5,
            intensity_gain: 60,
            streaks_per_frame: 40,
            coverage_cap: 0.4,
            noise_sigma: None,
            seed: 0,
        }
    }
}

impl RainStreakParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !self.direction.is_finite() || self.direction.abs() > 45.0 {
            return bad(format!("direction {} outside [-45, 45]", self.direction));
        }
        if !self.length.is_finite() || self.length < 1.0 {
            return bad(format!("streak length {} must be at least 1 pixel", self.length));
        }
        if !self.width.is_finite() || self.width <= 0.0 {
            return bad(format!("streak width {} must be positive", self.width));
        }
        if !(0.0..1.0).contains(&self.coverage_cap) {
            return bad(format!("coverage_cap {} outside [0, 1)", self.coverage_cap));
        }
        if let Some(sigma) = self.noise_sigma {
            if !sigma.is_finite() || sigma < 0.0 {
                return bad(format!("noise_sigma {sigma} must be finite and non-negative"));
            }
        }
        Ok(())
    }

    fn stream(&self, frame_index: usize, purpose: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(frame_index as u64 * 2 + purpose);
        rng
    }
}

const STREAK_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// A clean plate, the rain sequence built on it and per-frame coverage masks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGroundTruth {
    pub clean: Frame,
    /// Single-channel rain layers, before clamping and noise.
    pub layers: Vec<Frame>,
    /// `layers[k] > 0`.
    pub masks: Vec<RainMask>,
    pub sequence: Sequence,
    pub params: RainStreakParams,
}

impl SynthGroundTruth {
    /// Largest per-site coverage fraction over the sequence.
    pub fn max_coverage(&self) -> f64 {
        let sites = self.clean.width() as usize * self.clean.height() as usize;
        let mut counts = vec![0u32; sites];
        for mask in &self.masks {
            for (c, &m) in counts.iter_mut().zip(mask.data()) {
                *c += m as u32;
            }
        }
        counts.into_iter().max().unwrap_or(0) as f64 / self.masks.len() as f64
    }

    /// Writes `frame_%06d.png`, `clean.png`, `mask_%06d.png` and `params.json`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.sequence.write_dir(dir)?;
        self.clean.save_png(dir.join("clean.png"))?;
        for (k, mask) in self.masks.iter().enumerate() {
            mask.to_frame().save_png(dir.join(format!("mask_{k:06}.png")))?;
        }
        let json = serde_json::to_string_pretty(&self.params)?;
        let path = dir.join("params.json");
        fs::write(&path, json).map_err(|e| Error::io(path, e))
    }
}

/// Non-zero pixels of one rasterized streak: `(pixel index, value)`.
type Footprint = Vec<(usize, u8)>;

fn draw_streak(rng: &mut ChaCha12Rng, params: &RainStreakParams, width: u32, height: u32) -> Footprint {
    let cx = rng.random_range(0..width) as f64;
    let cy = rng.random_range(0..height) as f64;
    rasterize(cx, cy, params, width, height)
}

/// Anti-aliased capsule centred on pixel `(cx, cy)`. A pixel at distance `d`
/// from the axis segment gets coverage `clamp(width / 2 + 0.5 - d, 0, 1)`.
fn rasterize(cx: f64, cy: f64, params: &RainStreakParams, width: u32, height: u32) -> Footprint {
    let theta = params.direction.to_radians();
    let (ax, ay) = (theta.sin(), theta.cos());
    let half = (params.length - 1.0) / 2.0;
    let (x0, y0) = (cx - half * ax, cy - half * ay);
    let seg_len = 2.0 * half;
    let reach = params.width / 2.0 + 0.5;

    let pad = reach.ceil();
    let xmin = ((cx - half * ax.abs() - pad).floor().max(0.0)) as u32;
    let xmax = ((cx + half * ax.abs() + pad).ceil().min(width as f64 - 1.0)) as u32;
    let ymin = ((cy - half * ay.abs() - pad).floor().max(0.0)) as u32;
    let ymax = ((cy + half * ay.abs() + pad).ceil().min(height as f64 - 1.0)) as u32;

    let mut out = Vec::new();
    for py in ymin..=ymax {
        for px in xmin..=xmax {
            let (dx, dy) = (px as f64 - x0, py as f64 - y0);
            let t = (dx * ax + dy * ay).clamp(0.0, seg_len);
            let dist = ((dx - t * ax).powi(2) + (dy - t * ay).powi(2)).sqrt();
            let coverage = (reach - dist).clamp(0.0, 1.0);
            let value = (params.intensity_gain as f64 * coverage).round() as u8;
            if value > 0 {
                out.push((py as usize * width as usize + px as usize, value));
            }
        }
    }
    out
}

fn layer_frame(layer: Vec<u8>, width: u32, height: u32, index: usize) -> (Frame, RainMask) {
    let mask = RainMask::from_data(width, height, layer.iter().map(|&v| (v > 0) as u8).collect())
        .expect("mask shape matches layer");
    let frame = Frame::new(width, height, 1, layer)
        .expect("layer shape")
        .with_index(index);
    (frame, mask)
}

/// Rain layer for one frame with no coverage cap applied.
pub fn synth_streak_layer(
    params: &RainStreakParams,
    frame_index: usize,
    width: u32,
    height: u32,
) -> Result<(Frame, RainMask)> {
    params.validate()?;
    let mut rng = params.stream(frame_index, STREAK_STREAM);
    let mut layer = vec![0u8; width as usize * height as usize];
    for _ in 0..params.streaks_per_frame {
        for (idx, v) in draw_streak(&mut rng, params, width, height) {
            layer[idx] = layer[idx].max(v);
        }
    }
    Ok(layer_frame(layer, width, height, frame_index))
}

/// `n` rain frames over `clean`, with per-site coverage capped.
pub fn synth_sequence(clean: &Frame, params: &RainStreakParams, n: usize) -> Result<SynthGroundTruth> {
    params.validate()?;
    if n == 0 {
        return Err(Error::Parameter("sequence length must be at least 1".into()));
    }
    let (width, height) = (clean.width(), clean.height());
    let pixels = width as usize * height as usize;
    let cap = (params.coverage_cap * n as f64 + 1e-9).floor() as u32;
    let raining = params.intensity_gain > 0 && params.streaks_per_frame > 0;
    if raining && cap == 0 {
        return Err(Error::Infeasible(format!(
            "coverage_cap {} allows no covered frame out of {n}",
            params.coverage_cap
        )));
    }

    // Placement is sequential: a frame's acceptance test depends on the
    // coverage accumulated by earlier frames.
    let mut coverage = vec![0u32; pixels];
    let mut layers = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for k in 0..n {
        let mut rng = params.stream(k, STREAK_STREAM);
        let mut layer = vec![0u8; pixels];
        let budget = MAX_DRAWS_PER_STREAK * params.streaks_per_frame as usize;
        let mut accepted = 0;
        let mut draws = 0;
        while accepted < params.streaks_per_frame {
            if draws == budget {
                return Err(Error::Infeasible(format!(
                    "frame {k}: placed {accepted} of {} streaks under coverage cap {} after {draws} draws",
                    params.streaks_per_frame, params.coverage_cap
                )));
            }
            draws += 1;
            let footprint = draw_streak(&mut rng, params, width, height);
            let fits = footprint
                .iter()
                .all(|&(idx, _)| layer[idx] > 0 || coverage[idx] < cap);
            if !fits {
                continue;
            }
            for (idx, v) in footprint {
                if layer[idx] == 0 {
                    coverage[idx] += 1;
                }
                layer[idx] = layer[idx].max(v);
            }
            accepted += 1;
        }
        let (frame, mask) = layer_frame(layer, width, height, k);
        layers.push(frame);
        masks.push(mask);
    }

    let channels = clean.channels() as usize;
    let noise = params
        .noise_sigma
        .filter(|&s| s > 0.0)
        .map(|s| Normal::new(0.0, s).expect("validated sigma"));
    let frames: Vec<Frame> = layers
        .par_iter()
        .enumerate()
        .map(|(k, layer)| {
            let mut data = clean.data().to_vec();
            for (px, &rain) in data.chunks_exact_mut(channels).zip(layer.data()) {
                for v in px {
                    *v = v.saturating_add(rain);
                }
            }
            if let Some(noise) = &noise {
                let mut rng = params.stream(k, NOISE_STREAM);
                for v in &mut data {
                    let noisy = *v as f64 + noise.sample(&mut rng);
                    *v = noisy.round().clamp(0.0, 255.0) as u8;
                }
            }
            Frame::new(width, height, clean.channels(), data).expect("shape of clean")
        })
        .collect();

    Ok(SynthGroundTruth {
        clean: clean.clone().with_index(0),
        layers,
        masks,
        sequence: Sequence::new(frames, format!("synth-seed-{}", params.seed))?,
        params: params.clone(),
    })
}

/// A smooth, textured test plate with every sample in `[lo, hi]`.
///
/// Used as the clean background of synthetic experiments; keeping `hi`
/// well below 255 leaves headroom so rain never saturates.
pub fn test_plate(width: u32, height: u32, channels: u8, seed: u64, lo: u8, hi: u8) -> Result<Frame> {
    if lo > hi {
        return Err(Error::Parameter(format!("plate range [{lo}, {hi}] is empty")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let waves: Vec<[f64; 4]> = (0..3 * channels as usize)
        .map(|_| {
            [
                rng.random_range(0.01..0.12),
                rng.random_range(0.01..0.12),
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.3..1.0),
            ]
        })
        .collect();
    let span = (hi - lo) as f64;
    let mut data = Vec::with_capacity(width as usize * height as usize * channels as usize);
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels as usize {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for w in &waves[3 * c..3 * c + 3] {
                    acc += w[3] * (w[0] * x as f64 + w[1] * y as f64 + w[2]).sin();
                    norm += w[3];
                }
                let unit = 0.5 + 0.5 * acc / norm;
                data.push(lo + (unit * span).round() as u8);
            }
        }
    }
    Frame::new(width, height, channels, data)
}
