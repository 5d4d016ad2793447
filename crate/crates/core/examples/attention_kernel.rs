//! The four-direction IRNN scans behind the spatial attention module, the
//! attention gate, and a finite-difference check of their gradients.
//!
//! ```text
//! cargo run --release -p rainfree --example attention_kernel
//! ```

use rainfree::sam::{
    attention_gate, directional_scan, gradcheck, two_round_irnn, Direction, DirectionalWeights, MixWeights,
    SamParams, TensorMap,
};

pub fn run_example() -> rainfree::Result<String> {
    let mut lines = Vec::new();

    let row = TensorMap::new(1, 5, 1, vec![1.0, -2.0, 3.0, -1.0, 0.5])?;
    for dir in [Direction::LeftToRight, Direction::RightToLeft] {
        let h = directional_scan(&row, dir, &DirectionalWeights::uniform(1, 1.0))?;
        lines.push(format!("{dir:?} scan of {:?}: {:?}", row.data(), h.data()));
    }

    // A single bright pixel reaches every site after two rounds.
    let mut impulse = TensorMap::zeros(5, 5, 1);
    impulse.set(0, 0, 0, 1.0);
    let weights = DirectionalWeights::identity(1);
    let mix = MixWeights::identity_sum(1);
    let spread = two_round_irnn(&impulse, &weights, &weights, &mix, &mix)?;
    let reached = spread.data().iter().filter(|&&v| v > 0.0).count();
    lines.push(format!("impulse at the corner reaches {reached} of 25 sites after two rounds"));

    let mut params = SamParams::init(2, 7);
    params.mix1 = MixWeights::identity_sum(2);
    params.mix2 = MixWeights::identity_sum(2);
    params.attention.projection = vec![0.05, -0.03];
    let x = TensorMap::new(4, 4, 2, (0..32).map(|i| (i as f64 * 0.37).sin()).collect())?;
    let (gated, attention) = attention_gate(&x, &x, &params)?;
    let (lo, hi) = attention
        .data()
        .iter()
        .fold((f64::MAX, f64::MIN), |(lo, hi), &a| (lo.min(a), hi.max(a)));
    lines.push(format!(
        "attention over a 4x4x2 map lies in [{lo:.3}, {hi:.3}]; gated output sum {:.3}",
        gated.data().iter().sum::<f64>()
    ));

    let report = gradcheck(0, (5, 4, 2), 1e-5)?;
    lines.push(format!(
        "gradcheck: {} partials, {} kinks skipped, max relative error {:.2e}",
        report.num_checked, report.num_skipped_kinks, report.max_rel_err
    ));
    Ok(lines.join("\n"))
}

fn main() {
    match run_example() {
        Ok(text) => println!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
