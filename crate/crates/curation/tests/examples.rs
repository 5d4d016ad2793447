#[allow(dead_code)]
#[path = "../examples/curation_loop.rs"]
mod curation_loop;

#[test]
fn curation_loop_example() {
    let dir = tempfile::tempdir().unwrap();
    let text = curation_loop::run_example(dir.path()).unwrap();
    assert!(text.contains("n = 250"), "{text}");
    assert!(dir.path().join("state/dataset/job-000001/meta.json").exists());
}
