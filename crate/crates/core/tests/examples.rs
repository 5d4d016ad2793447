//! Every example runs to completion on its built-in data.

#[allow(dead_code)]
#[path = "../examples/estimate_background.rs"]
mod estimate_background;
#[allow(dead_code)]
#[path = "../examples/synthesize_rain.rs"]
mod synthesize_rain;
#[allow(dead_code)]
#[path = "../examples/mode_vs_percentile.rs"]
mod mode_vs_percentile;
#[allow(dead_code)]
#[path = "../examples/quality_metrics.rs"]
mod quality_metrics;
#[allow(dead_code)]
#[path = "../examples/attention_kernel.rs"]
mod attention_kernel;

#[test]
fn estimate_background_example() {
    let text = estimate_background::run_example(&[]).unwrap();
    assert!(text.contains("PSNR"), "{text}");
}

#[test]
fn estimate_background_example_on_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    synthesize_rain::run_example(&dir.path().join("seq"), None).unwrap();
    let out = dir.path().join("clean.png");
    let args = [dir.path().join("seq").display().to_string(), out.display().to_string()];
    estimate_background::run_example(&args).unwrap();
    assert!(out.exists());
}

#[test]
fn synthesize_rain_example() {
    let dir = tempfile::tempdir().unwrap();
    let text = synthesize_rain::run_example(dir.path(), None).unwrap();
    assert!(dir.path().join("frame_000039.png").exists(), "{text}");
    assert!(dir.path().join("params.json").exists());
}

#[test]
fn mode_vs_percentile_example() {
    assert_eq!(mode_vs_percentile::run_example().unwrap().lines().count(), 3);
}

#[test]
fn quality_metrics_example() {
    let text = quality_metrics::run_example(None).unwrap();
    assert!(text.contains("psnr_db"), "{text}");
}

#[test]
fn attention_kernel_example() {
    let text = attention_kernel::run_example().unwrap();
    assert!(text.contains("reaches 25 of 25"), "{text}");
}
