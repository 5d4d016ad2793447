mod common;

use std::fs;

use common::{write_rainy_sequence, WAIT};
use rainfree::metrics::rain_mask;
use rainfree::Frame;
use rainfree_curation::{
    replay_history, CurationError, Decision, DensityClass, JobState, PairMeta, Service, ServiceConfig,
};

fn service(dir: &std::path::Path) -> Service {
    Service::open(ServiceConfig::new(dir.join("state"))).unwrap()
}

#[test]
fn fresh_service_lists_nothing_then_one_job() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    assert!(svc.list_jobs().is_empty());
    write_rainy_sequence(&dir.path().join("seq"), 25, 1);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
    assert_eq!(job.current_n, 20);
    assert_eq!(job.state, JobState::Generating);
    assert_eq!(svc.list_jobs().len(), 1);
    let ready = svc.wait_settled(&job.id, WAIT).unwrap();
    assert_eq!(ready.state, JobState::NeedsReview);
    assert_eq!(ready.candidate.as_ref().unwrap().n_used, 20);
}

#[test]
fn too_few_frames_is_rejected_at_creation() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 12, 1);
    let err = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap_err();
    assert!(matches!(err, CurationError::InsufficientFrames { available: 12, needed: 20, .. }), "{err}");
    assert!(svc.list_jobs().is_empty());
    let missing = svc.create_job(dir.path().join("nope"), DensityClass::Sparse).unwrap_err();
    assert!(matches!(missing, CurationError::Core(_)));
}

#[test]
fn dense_job_grows_by_fifty() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 260, 2);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Dense).unwrap();
    assert_eq!(job.current_n, 200);
    svc.wait_settled(&job.id, WAIT).unwrap();
    let next = svc.decide(&job.id, Decision::Reject).unwrap();
    assert_eq!((next.current_n, next.state), (250, JobState::Generating));
    let ready = svc.wait_settled(&job.id, WAIT).unwrap();
    assert_eq!(ready.state, JobState::NeedsReview);
    assert_eq!(ready.candidate.unwrap().n_used, 250);
    // 300 frames would be needed next; only 260 exist.
    let done = svc.decide(&job.id, Decision::Reject).unwrap();
    assert_eq!((done.current_n, done.state), (250, JobState::Exhausted));
    assert_eq!(done.history.len(), 2);
}

#[test]
fn normal_job_exhausts_when_increment_does_not_fit() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 110, 3);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Normal).unwrap();
    svc.wait_settled(&job.id, WAIT).unwrap();
    let done = svc.decide(&job.id, Decision::Reject).unwrap();
    assert_eq!(done.state, JobState::Exhausted);
    assert_eq!(done.current_n, 100);
    assert!(matches!(svc.decide(&job.id, Decision::Accept), Err(CurationError::WrongState { .. })));
}

#[test]
fn accept_writes_the_quadruple() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 30, 4);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
    svc.wait_settled(&job.id, WAIT).unwrap();
    let candidate = svc.get_candidate(&job.id).unwrap();
    let accepted = svc.decide(&job.id, Decision::Accept).unwrap();
    assert_eq!(accepted.state, JobState::Accepted);

    let pair = svc.pair_dir(&job.id);
    let mut names: Vec<_> = fs::read_dir(&pair).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["clean.png", "mask.png", "meta.json", "rain.png"]);

    let meta: PairMeta = serde_json::from_slice(&fs::read(pair.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta.rain_frame_index, 9);
    assert_eq!(meta.n_used, 20);
    assert_eq!(meta.mask_threshold, 10);
    assert_eq!(meta.density, DensityClass::Sparse);

    let clean = Frame::open(pair.join("clean.png")).unwrap();
    assert_eq!(clean, Frame::from_png_bytes(&candidate).unwrap());
    let rain = Frame::open(pair.join("rain.png")).unwrap();
    assert_eq!(rain, Frame::open(dir.path().join("seq/frame_000009.png")).unwrap());
    let mask = Frame::open(pair.join("mask.png")).unwrap();
    assert_eq!(mask, rain_mask(&rain, &clean, 10).unwrap().to_frame());
    // Candidate stays readable after acceptance.
    assert_eq!(svc.get_candidate(&job.id).unwrap(), candidate);
}

#[test]
fn frame_samples_come_from_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 25, 5);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
    let bytes = svc.get_frame_sample(&job.id, 19).unwrap();
    assert_eq!(bytes, fs::read(dir.path().join("seq/frame_000019.png")).unwrap());
    assert!(matches!(svc.get_frame_sample(&job.id, 20), Err(CurationError::FrameOutOfRange { .. })));
    assert!(matches!(svc.get_frame_sample("job-999999", 0), Err(CurationError::NotFound(_))));
}

#[test]
fn state_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    write_rainy_sequence(&dir.path().join("seq"), 40, 6);
    let (reviewed, pending) = {
        let svc = service(dir.path());
        let a = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
        svc.wait_settled(&a.id, WAIT).unwrap();
        let a = svc.decide(&a.id, Decision::Reject).unwrap();
        let a = svc.wait_settled(&a.id, WAIT).unwrap();
        let b = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
        svc.wait_settled(&b.id, WAIT).unwrap();
        (a, b)
    };
    // Pretend the process died while the second job was generating.
    let path = dir.path().join("state/jobs").join(format!("{}.json", pending.id));
    let mut stale: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    stale["state"] = "Generating".into();
    stale["candidate"] = serde_json::Value::Null;
    fs::write(&path, serde_json::to_vec(&stale).unwrap()).unwrap();

    let svc = service(dir.path());
    assert_eq!(svc.job(&reviewed.id).unwrap(), reviewed);
    let resumed = svc.wait_settled(&pending.id, WAIT).unwrap();
    assert_eq!(resumed.state, JobState::NeedsReview);
    let fresh = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
    assert_eq!(fresh.id, "job-000003");
}

#[test]
fn replay_reproduces_terminal_state_and_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    write_rainy_sequence(&seq, 45, 7);
    let original = Service::open(ServiceConfig::new(dir.path().join("a"))).unwrap();
    let job = original.create_job(&seq, DensityClass::Sparse).unwrap();
    let mut candidates = Vec::new();
    for decision in [Decision::Reject, Decision::Reject, Decision::Accept] {
        original.wait_settled(&job.id, WAIT).unwrap();
        candidates.push(original.get_candidate(&job.id).unwrap());
        original.decide(&job.id, decision).unwrap();
    }
    let finished = original.job(&job.id).unwrap();
    assert_eq!(finished.current_n, 40);

    let fresh = Service::open(ServiceConfig::new(dir.path().join("b"))).unwrap();
    let replayed = replay_history(&fresh, &seq, DensityClass::Sparse, &finished.history, WAIT).unwrap();
    assert_eq!(replayed.state, finished.state);
    assert_eq!(replayed.current_n, finished.current_n);
    assert_eq!(replayed.candidate, finished.candidate);
    assert_eq!(fresh.get_candidate(&replayed.id).unwrap(), *candidates.last().unwrap());
    for name in ["rain.png", "clean.png", "mask.png", "meta.json"] {
        assert_eq!(
            fs::read(original.pair_dir(&job.id).join(name)).unwrap(),
            fs::read(fresh.pair_dir(&replayed.id).join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn concurrent_decisions_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let svc = service(dir.path());
    write_rainy_sequence(&dir.path().join("seq"), 30, 8);
    let job = svc.create_job(dir.path().join("seq"), DensityClass::Sparse).unwrap();
    svc.wait_settled(&job.id, WAIT).unwrap();
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let svc = svc.clone();
                let id = job.id.clone();
                let d = if i % 2 == 0 { Decision::Accept } else { Decision::Reject };
                s.spawn(move || svc.decide(&id, d))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(results.iter().filter(|r| r.is_ok()).count(), 1);
    assert!(results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .all(|e| matches!(e, CurationError::WrongState { .. })));
    assert_eq!(svc.job(&job.id).unwrap().history.len(), 1);
}
