use std::path::Path;
use std::process::{Command, Output};

use softrigid::spiral::{refit_oracle, SpiralMode};
use softrigid::GeometryParams;
use softrigid_cli::sweep::{run_sweep, SweepSpec};

fn softrigid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softrigid"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const STRAIGHT: &str = r#"{"x": 0, "y": 0, "phi": 0, "kappa1": 0, "kappa2": 0}"#;

#[test]
fn identical_start_and_target() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", &format!(r#"{{"q0": {STRAIGHT}, "qt": {STRAIGHT}}}"#));
    let out = softrigid(&["run", "s.json", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&tmp.path().join("o"));
    assert_eq!(s["converged"], true);
    assert_eq!(s["steps"], 0);
    assert_eq!(s["mode_runs"].as_array().unwrap().len(), 0);
    let plan = std::fs::read_to_string(tmp.path().join("o/plan.csv")).unwrap();
    assert_eq!(plan.lines().count(), 3);
}

#[test]
fn rigid_translation_is_one_rigid_run() {
    let tmp = tempfile::tempdir().unwrap();
    let target = r#"{"x": 0.1, "y": 0, "phi": 0, "kappa1": 0, "kappa2": 0}"#;
    write(tmp.path(), "s.json", &format!(r#"{{"q0": {STRAIGHT}, "qt": {target}}}"#));
    let out = softrigid(&["run", "s.json", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&tmp.path().join("o"));
    let runs = s["mode_runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["stiffness"], "00");
    assert_eq!(s["pauses"].as_array().unwrap().len(), 0);
}

#[test]
fn artifacts_carry_version_and_header() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", r#"{"seed": 4}"#);
    let out = softrigid(&["run", "s.json", "--out", "o", "--preset", "paper-compat"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("o");
    for name in ["plan.csv", "trajectory.csv", "thermal.csv"] {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(softrigid::export::VERSION_LINE), "{name}");
        assert!(lines.next().unwrap().starts_with('t'), "{name}");
    }
    let svgs: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".svg"))
        .collect();
    assert!(svgs.len() >= 2);
    for e in svgs {
        let text = std::fs::read_to_string(e.path()).unwrap();
        assert!(text.starts_with("<!-- softrigid "));
    }
}

#[test]
fn unknown_key_is_a_validation_error_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", "{\n  \"seed\": 1,\n  \"speed\": 2\n}\n");
    let out = softrigid(&["run", "s.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("s.json:3:"), "{err}");
    assert!(err.contains("speed"), "{err}");
}

#[test]
fn malformed_json_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", "{\n  \"seed\": 1,\n  \"q0\": [\n}\n");
    let out = softrigid(&["run", "s.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("s.json:4:"));
}

#[test]
fn bad_integrator_flag_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", "{}");
    let out = softrigid(&["run", "s.json", "--integrator", "midpoint"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn step_budget_exhaustion_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", r#"{"seed": 2, "planner": {"max_steps": 3}}"#);
    let out = softrigid(&["run", "s.json", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(summary(&tmp.path().join("o"))["status"], "not_converged");
}

#[test]
fn unreachable_melting_point_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let target = r#"{"x": 0, "y": 0, "phi": 0, "kappa1": 0, "kappa2": 30}"#;
    write(
        tmp.path(),
        "s.json",
        &format!(r#"{{"q0": {STRAIGHT}, "qt": {target}, "thermal": {{"gain": 20}}, "rollout": {{"pause_timeout": 20}}}}"#),
    );
    let out = softrigid(&["run", "s.json", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(summary(&tmp.path().join("o"))["status"], "thermal_timeout");

    let out = softrigid(&["run", "s.json", "--out", "p", "--no-thermal"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(&tmp.path().join("p"))["pauses"].as_array().unwrap().len(), 0);
}

#[test]
fn integrator_flag_changes_the_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", r#"{"seed": 8, "flags": {"preset": "paper-compat"}}"#);
    softrigid(&["run", "s.json", "--out", "e"], tmp.path());
    softrigid(&["run", "s.json", "--out", "r", "--integrator", "rk4"], tmp.path());
    let e = std::fs::read(tmp.path().join("e/plan.csv")).unwrap();
    let r = std::fs::read(tmp.path().join("r/plan.csv")).unwrap();
    assert_ne!(e, r);
}

#[test]
fn batch_writes_one_directory_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = softrigid(
        &["run", "--batch", "4", "--seed", "10", "--preset", "paper-compat", "--out", "b"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("b");
    for i in 0..4 {
        let s = summary(&dir.join(format!("run_{i:03}")));
        assert_eq!(s["seed"], 10 + i);
    }
    let table = std::fs::read_to_string(dir.join("batch.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("batch_summary.json")).unwrap()).unwrap();
    assert_eq!(report["runs"], 4);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mode runs per converged run"));
}

#[test]
fn batch_run_matches_single_run_with_same_seed() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "s.json", r#"{"seed": 12}"#);
    softrigid(&["run", "s.json", "--out", "single"], tmp.path());
    softrigid(&["run", "--batch", "1", "--seed", "12", "--out", "b"], tmp.path());
    for name in ["plan.csv", "trajectory.csv"] {
        let a = std::fs::read(tmp.path().join("single").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b/run_000").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn single_point_sweep_equals_refit() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = SweepSpec::parse(Path::new("sw.json"), r#"{"modes": ["II"], "n_samples": 120}"#).unwrap();
    let report = run_sweep(&spec, tmp.path()).unwrap();
    assert_eq!(report.rows.len(), 1);
    let direct = refit_oracle(SpiralMode::Opposite, &GeometryParams::default(), 120).unwrap();
    assert_eq!(report.rows[0].fit, direct);
}

#[test]
fn sweep_over_lengths_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "sw.json",
        r#"{"modes": ["I", "II", "III"], "lengths": [0.01, 0.1, 1.0], "n_samples": 100}"#,
    );
    let out = softrigid(&["sweep", "sw.json", "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(tmp.path().join("o/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 2 + 9);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("o/sweep_summary.json")).unwrap()).unwrap();
    for m in report["spread"].as_array().unwrap() {
        assert!(m["a_spread"].as_f64().unwrap() < 0.01);
        assert!(m["b_spread"].as_f64().unwrap() < 0.01);
    }
}

#[test]
fn sweep_rejects_unknown_mode() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "sw.json", "{\n  \"modes\": [\"IV\"]\n}\n");
    let out = softrigid(&["sweep", "sw.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sw.json:2:"));
}
