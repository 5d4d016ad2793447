//! One curation job end to end, in process: a dense sequence is rejected
//! once, regenerated with 50 more frames, then accepted into the dataset.
//!
//! ```text
//! cargo run --release -p rainfree-curation --example curation_loop -- [work-dir]
//! ```
//!
//! `rainfree serve` exposes the same service over HTTP.

use std::path::Path;
use std::time::Duration;

use rainfree::synth::{synth_sequence, test_plate, RainStreakParams};
use rainfree_curation::{Decision, DensityClass, Service, ServiceConfig};

pub fn run_example(work: &Path) -> rainfree_curation::Result<String> {
    let plate = test_plate(64, 48, 3, 5, 20, 200)?;
    let params = RainStreakParams {
        streaks_per_frame: 25,
        noise_sigma: Some(2.0),
        ..Default::default()
    };
    let frames = work.join("sequence");
    synth_sequence(&plate, &params, 260)?.sequence.write_dir(&frames)?;

    let service = Service::open(ServiceConfig::new(work.join("state")))?;
    let job = service.create_job(&frames, DensityClass::Dense)?;
    let mut lines = vec![format!("created {} at n = {}", job.id, job.current_n)];
    let wait = Duration::from_secs(120);

    let job = service.wait_settled(&job.id, wait)?;
    lines.push(format!("candidate ready: p_hat {}", job.candidate.as_ref().map_or(0, |c| c.p_hat)));
    let job = service.decide(&job.id, Decision::Reject)?;
    lines.push(format!("rejected, regenerating at n = {}", job.current_n));
    let job = service.wait_settled(&job.id, wait)?;
    let job = service.decide(&job.id, Decision::Accept)?;
    lines.push(format!("accepted at n = {}; pair written to {}", job.current_n, service.pair_dir(&job.id).display()));
    Ok(lines.join("\n"))
}

fn main() {
    let arg = std::env::args().nth(1);
    let temp;
    let work = match &arg {
        Some(dir) => Path::new(dir),
        None => {
            temp = tempfile::tempdir().expect("temporary directory");
            temp.path()
        }
    };
    match run_example(work) {
        Ok(text) => println!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
