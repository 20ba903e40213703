use std::path::Path;
use std::process::{Command, Output};

fn gaitcore(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitcore"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GAITCORE_CONFIG")
        .output()
        .unwrap()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = gaitcore(args, cwd);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn simulated(dir: &Path) {
    ok(&["simulate", "--seed", "4", "--out", "."], dir);
}

#[test]
fn simulate_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    for f in ["trial.gcrec", "frames.csv", "truth.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let header = std::fs::read_to_string(dir.path().join("frames.csv")).unwrap();
    assert!(header.starts_with("timestamp_ms,fsr0,"));
}

#[test]
fn same_seed_same_trial() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulated(a.path());
    simulated(b.path());
    let read = |d: &Path| std::fs::read(d.join("trial.gcrec")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn analyze_formats_and_files() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let text = ok(&["analyze", "--input", "trial.gcrec", "--out", "out"], dir.path());
    assert!(text.contains("10 cycles"), "{text}");
    for f in [
        "report.json",
        "report.csv",
        "events.csv",
        "trajectory.csv",
        "feedback.csv",
    ] {
        assert!(dir.path().join("out").join(f).is_file(), "{f}");
    }
    let json = ok(
        &["analyze", "--input", "frames.csv", "--out", "out2", "--format", "json"],
        dir.path(),
    );
    let report: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(report["summary"]["cycles"], 10);
    let csv = ok(
        &["analyze", "--input", "frames.csv", "--out", "out2", "--format", "csv"],
        dir.path(),
    );
    assert!(csv.lines().any(|l| l.starts_with("Spatial,Cycle Length,m,")));

    // Recording and CSV of one trial validate against the same truth.
    for out in ["out", "out2"] {
        let report = format!("{out}/report.json");
        ok(
            &["validate", "--truth", "truth.json", "--report", &report, "--out", out],
            dir.path(),
        );
    }
}

#[test]
fn validate_batches_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for seed in ["1", "2", "3"] {
        ok(&["simulate", "--seed", seed, "--out", seed], d);
        ok(
            &["analyze", "--input", &format!("{seed}/trial.gcrec"), "--out", seed],
            d,
        );
    }
    let json = ok(
        &[
            "validate",
            "--truth",
            "1/truth.json",
            "2/truth.json",
            "3/truth.json",
            "--report",
            "1/report.json",
            "2/report.json",
            "3/report.json",
            "--format",
            "json",
        ],
        d,
    );
    let summary: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(summary["trials"], 3);
    assert_eq!(summary["rows"].as_array().unwrap().len(), 5);
    assert!(d.join("accuracy.json").is_file());
}

#[test]
fn validate_rejects_mismatched_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Noise-free trials differ by profile, not by seed.
    std::fs::write(d.join("slow.json"), r#"{"cadence_cycles_per_min": 50.0}"#).unwrap();
    ok(&["simulate", "--out", "a"], d);
    ok(&["simulate", "--profile", "slow.json", "--out", "b"], d);
    ok(&["analyze", "--input", "a/trial.gcrec", "--out", "a"], d);
    let out = gaitcore(&["validate", "--truth", "b/truth.json", "--report", "a/report.json"], d);
    assert_eq!(out.status.code(), Some(2));
    let out = gaitcore(
        &[
            "validate",
            "--truth",
            "a/truth.json",
            "b/truth.json",
            "--report",
            "a/report.json",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heatmap_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    ok(&["heatmap", "--input", "trial.gcrec", "--out", "cum"], dir.path());
    assert!(dir.path().join("cum/heatmap.csv").is_file());
    assert!(!dir.path().join("cum/heatmap.ppm").exists());
    ok(
        &[
            "heatmap",
            "--input",
            "trial.gcrec",
            "--at",
            "heel_off",
            "--out",
            "ho",
            "--image",
        ],
        dir.path(),
    );
    let ppm = std::fs::read(dir.path().join("ho/heatmap.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6"));
    let out = gaitcore(&["heatmap", "--input", "trial.gcrec", "--at", "landing"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stream_over_loopback() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let text = ok(&["stream", "--input", "trial.gcrec", "--speed", "0"], dir.path());
    assert!(text.contains("published 1151 frames"), "{text}");
    assert!(text.contains("42 events"), "{text}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // Missing input file.
    assert_eq!(gaitcore(&["analyze", "--input", "nope.csv"], d).status.code(), Some(2));
    // Malformed CSV.
    std::fs::write(d.join("bad.csv"), "timestamp_ms,fsr0\n1,2\n").unwrap();
    assert_eq!(gaitcore(&["analyze", "--input", "bad.csv"], d).status.code(), Some(2));
    // A still foot never completes a cycle.
    let mut csv = String::from("timestamp_ms");
    for i in 0..15 {
        csv += &format!(",fsr{i}");
    }
    csv += ",ax,ay,az,gx,gy,gz\n";
    for t in 0..300 {
        csv += &format!("{}{},0,0,9.80665,0,0,0\n", t * 10, ",0".repeat(15));
    }
    std::fs::write(d.join("still.csv"), csv).unwrap();
    assert_eq!(gaitcore(&["analyze", "--input", "still.csv"], d).status.code(), Some(3));
    // Nothing listens on port 1.
    simulated(d);
    let out = gaitcore(
        &["stream", "--input", "trial.gcrec", "--transport", "mqtt://127.0.0.1:1"],
        d,
    );
    assert_eq!(out.status.code(), Some(4));
    // Bad config.
    std::fs::write(d.join("cfg.json"), r#"{"thresholds": {"min_phase_ms": "x"}}"#).unwrap();
    let out = gaitcore(&["--config", "cfg.json", "analyze", "--input", "trial.gcrec"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulated(d);
    std::fs::write(d.join("cfg.json"), r#"{"feedback": {"expected_load": 4.0}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gaitcore"))
        .args(["analyze", "--input", "trial.gcrec", "--out", "."])
        .current_dir(d)
        .env("GAITCORE_CONFIG", d.join("cfg.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(!text.contains(" 0 feedback commands"), "{text}");
}
