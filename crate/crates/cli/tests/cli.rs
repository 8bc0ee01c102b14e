use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cfpft::eval;
use cfpft::tracker;
use cfpft::{FrameSource, Synthetic, SyntheticSpec, TrackerConfig};

fn cfpft(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfpft"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = cfpft(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth(dir: &Path, extra: &[&str]) {
    let d = dir.to_str().unwrap();
    let mut args = vec!["synth", "--out-dir", d, "--frames", "30", "--seed", "4"];
    args.extend_from_slice(extra);
    ok(&args);
}

fn count_files(dir: &Path, suffix: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(suffix))
        .count()
}

#[test]
fn synth_writes_frames_and_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), &["--start", "100,100", "--motion", "1,0"]);
    assert_eq!(count_files(dir.path(), ".png"), 30);
    let gt = fs::read_to_string(dir.path().join("groundtruth_rect.txt")).unwrap();
    assert_eq!(gt.lines().next(), Some("80,80,40,40"));
    assert_eq!(gt.lines().nth(1), Some("81,80,40,40"));
}

#[test]
fn synth_rejects_object_leaving_canvas() {
    let dir = tempfile::tempdir().unwrap();
    let out = cfpft(&[
        "synth",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--motion",
        "10,0",
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("canvas"), "{err}");
}

#[test]
fn track_writes_one_row_per_frame_deterministically() {
    let seq = tempfile::tempdir().unwrap();
    synth(seq.path(), &["--motion", "2,1"]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [&a, &b] {
        let stdout = ok(&[
            "track",
            seq.path().to_str().unwrap(),
            "--out-dir",
            out.path().to_str().unwrap(),
        ])
        .stdout;
        assert!(String::from_utf8_lossy(&stdout).contains("fps"));
    }
    let results = fs::read_to_string(a.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 31);
    for name in ["results.csv", "diagnostics.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn ablation_flags_reproduce_plain_kcf() {
    let seq = tempfile::tempdir().unwrap();
    synth(seq.path(), &["--motion", "2,1"]);
    let out = tempfile::tempdir().unwrap();
    ok(&[
        "track",
        seq.path().to_str().unwrap(),
        "--no-redetect",
        "--no-scale",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    let synthetic = Synthetic::new(SyntheticSpec {
        frames: 30,
        motion: (2.0, 1.0),
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let gt = synthetic.ground_truth();
    let traj = tracker::run(&synthetic, gt.boxes[0], TrackerConfig::kcf_baseline()).unwrap();
    assert_eq!(
        fs::read_to_string(out.path().join("results.csv")).unwrap(),
        eval::boxes_csv(&traj.boxes, 1)
    );
    assert_eq!(synthetic.len(), 30);
}

#[test]
fn track_accepts_explicit_init_box() {
    let seq = tempfile::tempdir().unwrap();
    synth(seq.path(), &[]);
    fs::remove_file(seq.path().join("groundtruth_rect.txt")).unwrap();
    let out = tempfile::tempdir().unwrap();
    ok(&[
        "track",
        seq.path().to_str().unwrap(),
        "--init",
        "141,101,40,40",
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    let results = fs::read_to_string(out.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().nth(1), Some("1,141.000,101.000,40.000,40.000"));
}

#[test]
fn eval_protocols_emit_expected_files() {
    let seq = tempfile::tempdir().unwrap();
    synth(seq.path(), &["--motion", "1,1"]);
    let s = seq.path().to_str().unwrap();

    let ope = tempfile::tempdir().unwrap();
    ok(&["eval", s, "--protocol", "ope", "--out-dir", ope.path().to_str().unwrap()]);
    let summary = fs::read_to_string(ope.path().join("ope_summary.json")).unwrap();
    assert!(summary.contains("\"auc\""), "{summary}");
    let precision = fs::read_to_string(ope.path().join("ope_precision.csv")).unwrap();
    assert_eq!(precision.lines().count(), 52);
    let success = fs::read_to_string(ope.path().join("ope_success.csv")).unwrap();
    assert_eq!(success.lines().count(), 102);

    let tre = tempfile::tempdir().unwrap();
    ok(&["eval", s, "--protocol", "tre", "--out-dir", tre.path().to_str().unwrap()]);
    assert_eq!(count_files(tre.path(), "_boxes.csv"), 20);
    assert!(tre.path().join("tre_average_summary.json").is_file());
    assert!(tre.path().join("tre_20_summary.json").is_file());

    let sre = tempfile::tempdir().unwrap();
    ok(&["eval", s, "--protocol", "sre", "--out-dir", sre.path().to_str().unwrap()]);
    assert_eq!(count_files(sre.path(), "_boxes.csv"), 12);
}

#[test]
fn usage_errors_are_one_line() {
    let seq = tempfile::tempdir().unwrap();
    let out = cfpft(&["eval", seq.path().to_str().unwrap(), "--protocol", "vot"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");

    let out = cfpft(&["track", "/nonexistent/sequence"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("/nonexistent/sequence"), "{err}");

    let empty = tempfile::tempdir().unwrap();
    synth(empty.path(), &[]);
    fs::remove_file(empty.path().join("groundtruth_rect.txt")).unwrap();
    let out = cfpft(&["eval", empty.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("groundtruth_rect.txt"));
}
