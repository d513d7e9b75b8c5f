use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patchsis::cli::{read_equilibria, ScenarioConfig};
use patchsis::equilibria;

const HOMOGENEOUS: &str = r#"{"n": 2, "L": [[0, 1], [1, 0]], "beta": [1, 1], "gamma": [1, 1],
    "dS": 1, "dI": 1, "N": 4}"#;

const MULTI: &str = r#"{"n": 2, "L": [[0, 1], [2, 0]], "beta": [6, 1.5], "gamma": [4, 1],
    "dS": 0.001, "dI": 100, "N": 1.45}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchsis"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg(config).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn equilibria_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", MULTI);
    let a = run(&["equilibria"], &cfg);
    let b = run(&["equilibria"], &cfg);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn simulate_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", MULTI);
    let args = ["simulate", "--horizon", "5", "--points", "11", "--seed", "4"];
    let a = run(&args, &cfg);
    let b = run(&args, &cfg);
    let c = run(&["simulate", "--horizon", "5", "--points", "11", "--seed", "5"], &cfg);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(stdout(&a).lines().count(), 12);
}

#[test]
fn emitted_equilibria_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", MULTI);
    let out_dir = dir.path().join("out");
    let out = bin().args(["equilibria", "--out"]).arg(&out_dir).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let parsed = read_equilibria(&fs::read_to_string(out_dir.join("equilibria.json")).unwrap()).unwrap();
    let m = ScenarioConfig::from_json(MULTI).unwrap().model().unwrap();
    let direct = equilibria::find_endemic_equilibria(&m).unwrap();
    assert_eq!(parsed, direct);
    let csv = fs::read_to_string(out_dir.join("equilibria.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + direct.len());
}

#[test]
fn homogeneous_equilibrium_has_unit_l() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h.json", HOMOGENEOUS);
    let out_dir = dir.path().join("out");
    let out = bin().args(["equilibria", "--out"]).arg(&out_dir).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("equilibria.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    let l: f64 = rows[0].split(',').next().unwrap().parse().unwrap();
    assert!((l - 1.0).abs() < 1e-10, "l = {l}");
}

#[test]
fn disease_free_start_stays_at_dfe() {
    let dir = tempfile::tempdir().unwrap();
    let body = HOMOGENEOUS.replace("\"N\": 4", "\"N\": 4, \"I0\": [0, 0]");
    let cfg = write_config(dir.path(), "h.json", &body);
    let out = run(&["simulate", "--horizon", "50"], &cfg);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 50.0).abs() < 1e-12);
    for s in &last[1..3] {
        assert!((s - 2.0).abs() < 1e-12);
    }
    assert_eq!(&last[3..], &[0.0, 0.0]);
}

#[test]
fn sweep_writes_csv_and_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", MULTI);
    let out_dir = dir.path().join("sweep");
    let out = bin()
        .args(["sweep", "--param", "dS", "--from", "1e-4", "--to", "1", "--points", "5", "--out"])
        .arg(&out_dir)
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dS,count,l_roots,stability"));
    let counts: Vec<usize> = lines.map(|row| row.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(counts, vec![2, 2, 2, 0, 0]);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert!(meta["d1_star"].as_f64().unwrap() <= meta["d2_star"].as_f64().unwrap());
}

#[test]
fn analyses_succeed_on_valid_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", &MULTI.replace("1.45", "2"));
    for args in [
        vec!["r0"],
        vec!["dfe"],
        vec!["asymptotics", "--limit", "dS0"],
        vec!["asymptotics", "--limit", "dI0"],
        vec!["sigma-profile", "--sigma", "1"],
        vec!["critical-n"],
    ] {
        let out = run(&args, &cfg);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let _: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    }
}

#[test]
fn malformed_connectivity_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &HOMOGENEOUS.replace("[[0, 1], [1, 0]]", "[[0, -1], [1, 0]]"));
    let out = run(&["r0"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error kind="), "{err}");
    assert_eq!(err.lines().count(), 1);

    let cfg = write_config(dir.path(), "reducible.json", &HOMOGENEOUS.replace("[[0, 1], [1, 0]]", "[[0, 0], [1, 0]]"));
    assert_eq!(run(&["r0"], &cfg).status.code(), Some(2));

    let cfg = write_config(dir.path(), "extra.json", &HOMOGENEOUS.replace("\"N\": 4", "\"N\": 4, \"x\": 1"));
    assert_eq!(run(&["r0"], &cfg).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "h.json", HOMOGENEOUS);
    assert_eq!(run(&["bogus"], &cfg).status.code(), Some(2));
    assert_eq!(run(&["sweep", "--param", "dS", "--from", "1", "--to", "0.1"], &cfg).status.code(), Some(2));
    assert_eq!(run(&["r0", "--tol-rel", "-1"], &cfg).status.code(), Some(2));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_code_three() {
    // tolerances below machine precision force the step size to underflow
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "multi.json", MULTI);
    let out = run(&["simulate", "--tol-rel", "1e-30", "--tol-abs", "1e-30", "--horizon", "10"], &cfg);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error kind=StepUnderflow"), "{err}");
}
