#![allow(dead_code)]

use std::path::Path;
use std::time::Duration;

use rainfree::synth::{synth_sequence, test_plate, RainStreakParams};

pub const WAIT: Duration = Duration::from_secs(60);

/// Writes `n` rainy frames of a small static scene into `dir`.
pub fn write_rainy_sequence(dir: &Path, n: usize, seed: u64) {
    let clean = test_plate(12, 10, 3, seed, 20, 180).unwrap();
    let params = RainStreakParams {
        length: 4.0,
        width: 1.0,
        streaks_per_frame: 2,
        noise_sigma: Some(2.0),
        seed,
        ..Default::default()
    };
    synth_sequence(&clean, &params, n).unwrap().sequence.write_dir(dir).unwrap();
}
