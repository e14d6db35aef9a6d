use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eisenhart::cli::{self, ReportRow, EXIT_CHECK_FAILED, EXIT_CONFIG};

fn binary() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_eisenhart"))
}

fn scenario(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn invoke(args: &[&str]) -> Output {
    Command::new(binary()).args(args).output().unwrap()
}

const DAMPED: &str = r#"{
    "system": "damped-action",
    "params": {"gamma": 0.2},
    "initial": {"x": [1.0], "xp": [0.0], "u": 0.0, "w": 0.0},
    "span": {"from": 0.0, "to": 10.0},
    "charges": ["du"],
    "out_dir": "results"
}"#;

#[test]
fn run_writes_both_trajectories_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "damped.json", DAMPED);
    let out = invoke(&["run", path.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let results = dir.path().join("results");
    let geo = std::fs::read_to_string(results.join("geodesic.csv")).unwrap();
    let her = std::fs::read_to_string(results.join("herglotz.csv")).unwrap();
    let header = "u,sigma,x1,xp1,w,null_residual,Q_du,Qnl_du";
    assert_eq!(geo.lines().next(), Some(header));
    assert_eq!(her.lines().next(), Some(header));
    assert_eq!(geo.lines().count(), 202);

    let report = std::fs::read_to_string(results.join("report.jsonl")).unwrap();
    let rows: Vec<ReportRow> = report
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let eq = rows.iter().find(|r| r.check == "equivalence").unwrap();
    assert_eq!(eq.status, "pass");
    assert!(eq.residual <= 1e-6);
}

#[test]
fn free_particle_trajectory_is_linear() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "free.json",
        r#"{
            "system": "free",
            "initial": {"x": [0.5], "xp": [2.0], "u": 0.0, "w": 0.0},
            "span": {"from": 0.0, "to": 4.0},
            "samples": 8
        }"#,
    );
    cli::cmd_run(&path, None).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("out/geodesic.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let (u, x, xp) = (cells[0], cells[2], cells[3]);
        assert!((x - (0.5 + 2.0 * u)).abs() < 1e-12, "{line}");
        assert_eq!(xp, 2.0);
    }
}

#[test]
fn missing_parameter_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "bad.json",
        &DAMPED.replace("\"gamma\": 0.2", ""),
    );
    let out = invoke(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.gamma"));
}

#[test]
fn malformed_json_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "bad.json",
        "{\n  \"system\": \"free\",\n  \"initial\": [\n}",
    );
    let out = invoke(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn check_passes_and_fails_with_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "damped.json", DAMPED);
    let p = path.to_str().unwrap();

    let out = invoke(&[
        "check",
        p,
        "killing:du",
        "conformal-pair",
        "nonlocal-charge:du",
        "--json",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let rows: Vec<ReportRow> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|r| r.status == "pass" && !r.certifies.is_empty()));

    // the plain charge is not conserved under action-dependent damping
    let out = invoke(&["check", p, "charge:du"]);
    assert_eq!(out.status.code(), Some(EXIT_CHECK_FAILED));

    let out = invoke(&["check", p, "no-such-check"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let out = invoke(&["check", p, "killing:dx7"]);
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn list_names_the_catalog() {
    let out = invoke(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["free", "harmonic", "damped-time", "damped-action", "custom"] {
        assert!(text.contains(name));
    }
    let out = invoke(&["list", "--json"]);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 5);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "damped.json", DAMPED);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = invoke(&[
            "run",
            path.to_str().unwrap(),
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for f in ["geodesic.csv", "herglotz.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
}
