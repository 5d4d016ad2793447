//! Estimate the clean background of a frame directory.
//!
//! ```text
//! cargo run --release -p rainfree --example estimate_background -- <frames-dir> [out.png]
//! ```
//!
//! Without arguments a synthetic rainy sequence is generated first, and the
//! estimate is scored against its known clean plate.

use std::path::PathBuf;

use rainfree::estimator::Estimator;
use rainfree::frame::load_sequence;
use rainfree::metrics::evaluate;
use rainfree::synth::{synth_sequence, test_plate, RainStreakParams};

pub fn run_example(args: &[String]) -> rainfree::Result<String> {
    let estimator = Estimator::new();
    if let Some(dir) = args.first() {
        let seq = load_sequence(dir, None)?;
        let clean = estimator.estimate(&seq)?;
        let out = args.get(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("clean.png"));
        clean.image.save_png(&out)?;
        return Ok(format!(
            "{} frames of {}x{}: p_hat {} covering {:.1}% of sites, wrote {}",
            seq.len(),
            seq.width(),
            seq.height(),
            clean.p_hat,
            100.0 * clean.coverage,
            out.display()
        ));
    }

    let plate = test_plate(160, 120, 3, 3, 20, 200)?;
    let params = RainStreakParams {
        streaks_per_frame: 60,
        noise_sigma: Some(2.0),
        ..Default::default()
    };
    let truth = synth_sequence(&plate, &params, 60)?;
    let clean = estimator.estimate(&truth.sequence)?;
    let report = evaluate(&clean.image, &plate)?;
    Ok(format!(
        "synthetic 160x120x60: p_hat {} covering {:.1}% of sites, PSNR {:.2} dB, SSIM {:.4}",
        clean.p_hat,
        100.0 * clean.coverage,
        report.psnr_db,
        report.ssim
    ))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run_example(&args) {
        Ok(line) => println!("{line}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
