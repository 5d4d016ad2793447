//! PSNR, SSIM, thresholded rain masks and the training losses.
//!
//! ```text
//! cargo run --release -p rainfree --example quality_metrics -- [a.png b.png]
//! ```

use rainfree::frame::Frame;
use rainfree::metrics::{evaluate, rain_mask, total_loss, AttentionMap, DEFAULT_MASK_THRESHOLD};
use rainfree::synth::{synth_sequence, test_plate, RainStreakParams};

pub fn run_example(pair: Option<(&str, &str)>) -> rainfree::Result<String> {
    if let Some((a, b)) = pair {
        let report = evaluate(&Frame::open(a)?, &Frame::open(b)?)?;
        return Ok(serde_json::to_string(&report)?);
    }

    let clean = test_plate(96, 96, 3, 4, 20, 200)?;
    let params = RainStreakParams {
        streaks_per_frame: 30,
        ..Default::default()
    };
    let truth = synth_sequence(&clean, &params, 10)?;
    let rain = &truth.sequence.frames()[0];
    let mask = rain_mask(rain, &clean, DEFAULT_MASK_THRESHOLD)?;
    let report = evaluate(rain, &clean)?;

    // An attention map that agrees with the mask, and one that ignores it.
    let exact = AttentionMap::new(96, 96, mask.data().iter().map(|&m| m as f64).collect())?;
    let blind = AttentionMap::filled(96, 96, 0.0)?;
    let good = total_loss(&clean, &clean, &exact, &mask)?;
    let poor = total_loss(rain, &clean, &blind, &mask)?;
    Ok(format!(
        "rainy frame: {}\nmask: {} of {} pixels above {}\nloss with clean output and exact attention: {:.4}\nloss with rainy output and blind attention: {:.4} (l1 {:.4}, ssim {:.4}, attention {:.4})",
        serde_json::to_string(&report)?,
        mask.count(),
        96 * 96,
        DEFAULT_MASK_THRESHOLD,
        good.total,
        poor.total,
        poor.l1,
        poor.l_ssim,
        poor.l_att
    ))
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pair = match &args[..] {
        [a, b] => Some((a.as_str(), b.as_str())),
        _ => None,
    };
    match run_example(pair) {
        Ok(text) => println!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
