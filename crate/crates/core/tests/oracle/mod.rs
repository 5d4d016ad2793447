//! Naive reference implementations used as test oracles.
//!
//! Nothing here calls into the estimator: modes come from ordered maps,
//! percentile bounds are compared as floating-point percentages and every
//! rank is evaluated by a full loop. Slow by construction.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rainfree::frame::{Frame, Sequence};
use rainfree::synth::{test_plate, RainStreakParams};

pub struct NaiveStats {
    pub mode: u8,
    pub mode_count: usize,
    pub r_min: f64,
    pub r_max: f64,
}

pub fn naive_mode(samples: &[u8]) -> NaiveStats {
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for &s in samples {
        *counts.entry(s).or_default() += 1;
    }
    let best = *counts.values().max().unwrap();
    // BTreeMap iterates ascending, so the first hit is the lowest tied value.
    let mode = *counts.iter().find(|(_, &c)| c == best).unwrap().0;
    let n = samples.len() as f64;
    let below = samples.iter().filter(|&&s| s < mode).count() as f64;
    let above = samples.iter().filter(|&&s| s > mode).count() as f64;
    NaiveStats {
        mode,
        mode_count: best,
        r_min: 100.0 * below / n,
        r_max: 100.0 * above / n,
    }
}

/// Nearest-rank percentile by sorting and a floating-point ceiling.
pub fn naive_percentile(samples: &[u8], p: u32) -> u8 {
    let mut sorted = samples.to_vec();
    sorted.sort();
    let rank = ((p as f64 * sorted.len() as f64) / 100.0).ceil().max(1.0) as usize;
    sorted[rank - 1]
}

/// Span membership read straight off the percentages: `r_min < p <= 100 - r_max`.
pub fn naive_in_span(stats: &NaiveStats, p: u32) -> bool {
    let p = p as f64;
    stats.r_min < p && p <= 100.0 - stats.r_max
}

pub fn naive_vote(field: &[NaiveStats]) -> Vec<u64> {
    (0..=100u32)
        .map(|p| field.iter().filter(|s| naive_in_span(s, p)).count() as u64)
        .collect()
}

pub fn naive_argmax(votes: &[u64]) -> u32 {
    let mut best = 0;
    for p in 0..votes.len() {
        if votes[p] > votes[best] {
            best = p;
        }
    }
    best as u32
}

pub struct NaiveResult {
    pub image: Vec<u8>,
    pub p_hat: u32,
    pub votes: Vec<u64>,
    pub modes: Vec<u8>,
}

/// Site traces collected pixel by pixel from the frames.
pub fn naive_traces(seq: &Sequence) -> Vec<Vec<u8>> {
    let first = &seq.frames()[0];
    let mut traces = Vec::with_capacity(first.data().len());
    for y in 0..first.height() {
        for x in 0..first.width() {
            for c in 0..first.channels() {
                traces.push(seq.frames().iter().map(|f| f.get(x, y, c).unwrap()).collect());
            }
        }
    }
    traces
}

pub fn naive_estimate(seq: &Sequence) -> NaiveResult {
    let traces = naive_traces(seq);
    let field: Vec<NaiveStats> = traces.iter().map(|t| naive_mode(t)).collect();
    let votes = naive_vote(&field);
    let p_hat = naive_argmax(&votes);
    NaiveResult {
        image: traces.iter().map(|t| naive_percentile(t, p_hat)).collect(),
        p_hat,
        votes,
        modes: field.iter().map(|s| s.mode).collect(),
    }
}

pub fn naive_psnr(a: &[u8], b: &[u8]) -> f64 {
    let mse: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

/// Direct-window SSIM: full 2-D Gaussian window, no separable filtering.
pub fn naive_ssim(a: &Frame, b: &Frame) -> f64 {
    let (w, h, ch) = (a.width() as usize, a.height() as usize, a.channels() as usize);
    let win = 11usize;
    let sigma = 1.5f64;
    let mut kernel = vec![0.0; win * win];
    for i in 0..win {
        for j in 0..win {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            kernel[i * win + j] = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));

    let mut channel_means = Vec::new();
    for c in 0..ch {
        let px = |f: &Frame, x: usize, y: usize| f.data()[(y * w + x) * ch + c] as f64;
        let mut acc = 0.0;
        let mut count = 0usize;
        for y0 in 0..=h - win {
            for x0 in 0..=w - win {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..win {
                    for j in 0..win {
                        let k = kernel[i * win + j];
                        let (va, vb) = (px(a, x0 + j, y0 + i), px(b, x0 + j, y0 + i));
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        channel_means.push(acc / count as f64);
    }
    channel_means.iter().sum::<f64>() / ch as f64
}

/// The five fixed acceptance scenes: 256x256 RGB plates in [20, 200].
pub fn acceptance_plate(index: u64) -> Frame {
    test_plate(256, 256, 3, 1000 + index, 20, 200).unwrap()
}

/// Streak settings of acceptance scene `index`; all have gain >= 40 and a
/// 0.4 coverage cap.
pub fn acceptance_params(index: u64, noise_sigma: Option<f64>) -> RainStreakParams {
    let i = index as f64;
    RainStreakParams {
        direction: -20.0 + 10.0 * i,
        length: 12.0 + 3.0 * i,
        width: 1.0 + 0.4 * i,
        intensity_gain: 40 + 10 * index as u8,
        streaks_per_frame: 320 - 40 * index as u32,
        coverage_cap: 0.4,
        noise_sigma,
        seed: 42 + index,
    }
}

pub const ACCEPTANCE_SCENES: u64 = 5;
pub const ACCEPTANCE_FRAMES: usize = 100;
