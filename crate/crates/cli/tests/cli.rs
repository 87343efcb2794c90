//! End-to-end runs of the `tsdyn` binary against the shipped configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn tsdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsdyn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn repro_all_passes() {
    let out = tsdyn(&["repro", "all"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}\n{}", stderr(&out));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9, "{text}");
    assert!(!text.contains("FAIL"), "{text}");
}

#[test]
fn solve_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a.csv");
    let out2 = dir.path().join("b.csv");
    let cfg = config("example3_sigma.json");
    let run1 = tsdyn(&["solve", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert!(run1.status.success(), "{}", stderr(&run1));
    let run2 = tsdyn(&["solve", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert!(run2.status.success());
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b, "solve output must be deterministic");
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x_11,x_12,x_21,x_22");
    let first = lines.next().unwrap();
    assert!(first.starts_with("0.0000000000000000e0,1.0000000000000000e0"));
}

#[test]
fn certify_passes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let cfg = config("example1_certify.json");
    let out = tsdyn(&[
        "certify",
        cfg.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}\n{}", stderr(&out));
    assert!(text.contains("overall: pass"), "{text}");
    let json = std::fs::read_to_string(&report).unwrap();
    assert!(json.contains("\"format_version\": 1"));
    assert!(json.contains("partial_bound"));
}

#[test]
fn certify_rejects_mutated_bound() {
    let dir = tempfile::tempdir().unwrap();
    let mutated = std::fs::read_to_string(config("example1_certify.json"))
        .unwrap()
        .replace("[[2.0, 0.0], [0.0, 2.0]]", "[[1.0, 0.0], [0.0, 1.0]]");
    let cfg = dir.path().join("mutated.json");
    std::fs::write(&cfg, mutated).unwrap();
    let out = tsdyn(&["certify", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("overall: fail"), "{}", stdout(&out));
}

#[test]
fn fuzz_flags_nonunique_problem() {
    let cfg = config("nonunique_fuzz.json");
    let out = tsdyn(&["fuzz", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stdout(&out).contains("multiplicity suspected: true"), "{}", stdout(&out));
}

#[test]
fn nonregressive_linear_solve_fails_loudly() {
    let cfg = config("linear_nonregressive.json");
    let out = tsdyn(&["solve", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("regressivity failure"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn exp_emits_scattered_factors() {
    let cfg = config("exp_mixed.json");
    let out = tsdyn(&["exp", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x_11,x_12,x_21,x_22");
    // e(0.25, 0) = I + 0.25 K for K = [[1,1],[0,1]]
    let row: Vec<f64> = lines
        .next()
        .and_then(|_| text.lines().nth(2))
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row[0], 0.25);
    assert_eq!(row[1], 1.25);
    assert_eq!(row[2], 0.25);
    assert_eq!(row[3], 0.0);
    assert_eq!(row[4], 1.25);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"format_version": 1, "timescale": [[0, 1]], "dimension": 1, "bogus": 1}"#,
    )
    .unwrap();
    let out = tsdyn(&["solve", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("config error"), "{}", stderr(&out));
}
