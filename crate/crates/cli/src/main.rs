//! `rainfree`: one binary over the estimator, generator, metrics, kernel
//! checks and curation service.
//!
//! Diagnostics go to stderr as one JSON object per line. Exit codes: 0 ok,
//! 1 failed check, 2 input error, 3 parameter or feasibility error,
//! 4 environment error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rainfree::frame::load_sequence;
use rainfree::metrics::{evaluate, DEFAULT_MASK_THRESHOLD};
use rainfree::sam::gradcheck;
use rainfree::synth::{synth_sequence, RainStreakParams};
use rainfree::{Error, ErrorKind, Estimator, Frame};
use rainfree_curation::http::router;
use rainfree_curation::{CurationError, Service, ServiceConfig};
use serde_json::json;

const GRADCHECK_STEP: f64 = 1e-5;
const GRADCHECK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "rainfree", version, about = "Rain-free background plates from static-scene image sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the clean background of a frame directory.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Use only the first N frames.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Render a synthetic rainy sequence over a clean plate.
    Synth {
        /// Clean plate PNG.
        #[arg(long)]
        input: PathBuf,
        /// Rain parameters as JSON; defaults apply to omitted keys.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Overrides the seed in the params file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print PSNR and SSIM of two images as JSON.
    Evaluate { a: PathBuf, b: PathBuf },
    /// Time background estimation end to end.
    Bench {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// Also write the estimate as clean.png here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the curation service.
    Serve {
        #[arg(long)]
        state_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Finalized pairs directory; defaults to <state-dir>/dataset.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Static review UI to serve at /.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MASK_THRESHOLD)]
        threshold: u8,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check the attention kernel's gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shape as HxWxC.
        #[arg(long, default_value = "5x4x2", value_parser = parse_shape)]
        shape: (usize, usize, usize),
    },
}

fn parse_shape(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<usize> = s
        .split('x')
        .map(|p| p.trim().parse().map_err(|_| format!("bad shape component {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [h, w, c] => Ok((h, w, c)),
        _ => Err(format!("shape must be HxWxC, got {s:?}")),
    }
}

struct Failure {
    code: u8,
    tag: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Parameter => 3,
            ErrorKind::Environment => 4,
        };
        Failure {
            code,
            tag: e.tag(),
            message: e.to_string(),
        }
    }
}

impl From<CurationError> for Failure {
    fn from(e: CurationError) -> Self {
        match e {
            CurationError::Core(e) => e.into(),
            other => Failure {
                code: 4,
                tag: other.tag(),
                message: other.to_string(),
            },
        }
    }
}

fn environment(tag: &'static str, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 4,
        tag,
        message: e.to_string(),
    }
}

fn estimator(threads: Option<usize>) -> Estimator {
    threads.map(Estimator::with_threads).unwrap_or_default()
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(value).expect("serializable output"));
}

fn write_estimate(output: &Path, clean: &rainfree::CandidateClean) -> Result<(), Failure> {
    fs::create_dir_all(output).map_err(|e| Error::io(output, e))?;
    clean.image.save_png(output.join("clean.png"))?;
    let sidecar = output.join("clean.json");
    let text = serde_json::to_vec_pretty(&clean.sidecar()).map_err(Error::from)?;
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate { input, output, n, threads } => {
            let seq = load_sequence(&input, n)?;
            let clean = estimator(threads).estimate(&seq)?;
            write_estimate(&output, &clean)?;
            print_json(&clean.sidecar());
        }
        Command::Synth { input, params, output, n, seed } => {
            let mut p: RainStreakParams = match params {
                Some(path) => {
                    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    serde_json::from_slice(&text).map_err(Error::from)?
                }
                None => RainStreakParams::default(),
            };
            if let Some(seed) = seed {
                p.seed = seed;
            }
            let clean = Frame::open(&input)?;
            let truth = synth_sequence(&clean, &p, n)?;
            truth.write_dir(&output)?;
            print_json(&json!({ "frames": n, "max_coverage": truth.max_coverage() }));
        }
        Command::Evaluate { a, b } => {
            print_json(&evaluate(&Frame::open(&a)?, &Frame::open(&b)?)?);
        }
        Command::Bench { input, threads, n, output } => {
            let start = Instant::now();
            let seq = load_sequence(&input, n)?;
            let loaded = start.elapsed().as_secs_f64();
            let clean = estimator(threads).estimate(&seq)?;
            let seconds = start.elapsed().as_secs_f64();
            if let Some(output) = output {
                write_estimate(&output, &clean)?;
            }
            let sites = seq.sites();
            print_json(&json!({
                "threads": threads,
                "frames": seq.len(),
                "sites": sites,
                "load_seconds": loaded,
                "seconds": seconds,
                "sites_per_second": sites as f64 / seconds,
            }));
        }
        Command::Serve { state_dir, port, output, ui, threshold, threads } => {
            let mut config = ServiceConfig::new(state_dir);
            if let Some(dir) = output {
                config.dataset_dir = dir;
            }
            config.mask_threshold = threshold;
            config.threads = threads;
            let service = Service::open(config)?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| environment("runtime", e))?;
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
                    .await
                    .map_err(|e| environment("bind", format!("port {port}: {e}")))?;
                let addr = listener.local_addr().map_err(|e| environment("bind", e))?;
                eprintln!("{}", json!({ "listening": format!("http://{addr}") }));
                rainfree_curation::http::serve(listener, router(service, ui))
                    .await
                    .map_err(|e| environment("serve", e))
            })?;
        }
        Command::Gradcheck { seed, shape } => {
            let report = gradcheck(seed, shape, GRADCHECK_STEP)?;
            print_json(&report);
            if report.max_rel_err.is_nan() || report.max_rel_err >= GRADCHECK_TOLERANCE {
                return Err(Failure {
                    code: 1,
                    tag: "gradcheck_failed",
                    message: format!("max relative error {} exceeds {GRADCHECK_TOLERANCE}", report.max_rel_err),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", json!({ "error": f.tag, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
