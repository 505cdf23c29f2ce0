use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qm-arith"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const PAIR_3_4: &str = r#"{"registers": 2, "terms": [{"labels": [3, 4], "re": 1.0, "im": 0.0}]}"#;

#[test]
fn apply_plus_to_basis_pair() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.json", PAIR_3_4);
    let o = qm(&["apply", "PLUS", &f]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["registers"], 2);
    assert_eq!(v["terms"][0]["labels"], serde_json::json!([3, 7]));
    assert_eq!(v["terms"][0]["re"], 1.0);
}

#[test]
fn minus_undoes_plus_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let src = r#"{"registers": 2, "terms": [
        {"labels": [1, 0], "re": 0.6, "im": 0.0},
        {"labels": [2, -5], "re": 0.0, "im": 0.8}]}"#;
    let f = write(dir.path(), "s.json", src);
    let plus = qm(&["apply", "PLUS", &f]);
    assert_eq!(plus.status.code(), Some(0));
    let g = write(dir.path(), "t.json", &stdout(&plus));
    let back = qm(&["apply", "MINUS", &g]);
    assert_eq!(back.status.code(), Some(0));
    let original: Value = serde_json::from_str(src).unwrap();
    let round: Value = serde_json::from_str(&stdout(&back)).unwrap();
    assert_eq!(original, round);
}

#[test]
fn strict_times_rejects_zero_control() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "s.json",
        r#"{"registers": 2, "terms": [{"labels": [0, 5], "re": 1, "im": 0}]}"#,
    );
    let o = qm(&["apply", "TIMES_STRICT", &f]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("label 0"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn reversible_times_appends_ancilla() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "s.json",
        r#"{"registers": 2, "terms": [{"labels": [0, 5], "re": 1, "im": 0}]}"#,
    );
    let o = qm(&["apply", "TIMES_REVERSIBLE", &f]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["terms"][0]["labels"], serde_json::json!([0, 5, 0]));
}

#[test]
fn malformed_state_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "s.json", "{not json");
    assert_eq!(qm(&["apply", "PLUS", &f]).status.code(), Some(2));
    let f = write(
        dir.path(),
        "one.json",
        r#"{"registers": 1, "terms": [{"label": 1, "re": 1, "im": 0}]}"#,
    );
    assert_eq!(qm(&["apply", "PLUS", &f]).status.code(), Some(2));
    assert_eq!(qm(&["apply", "DIVIDE", &f]).status.code(), Some(2));
    assert_eq!(
        qm(&["apply", "PLUS", "/nonexistent/state.json"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn evolve_writes_trace_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let o = qm(&[
        "evolve",
        "2",
        "3",
        "--t-max",
        "1.2",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,fidelity,leakage"));
    assert_eq!(lines.count(), 200);
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap())
            .unwrap();
    assert_eq!(side["n"], 2);
    assert_eq!(side["D"], 32);
    let t = side["T"].as_f64().unwrap();
    assert!((t - 1.0).abs() <= 1.2 / 199.0, "T = {t}");
}

#[test]
fn evolve_inert_control() {
    let o = qm(&["evolve", "0", "5"]);
    assert_eq!(o.status.code(), Some(0));
    for line in stdout(&o).lines().skip(1) {
        let fields: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields[1], 1.0, "{line}");
        assert_eq!(fields[2], 0.0, "{line}");
    }
    let side: Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(side["T"], 0.0);
}

#[test]
fn evolve_negative_and_numeric() {
    let o = qm(&["evolve", "-2", "3", "--numeric", "--t-max", "1.2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let side: Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(side["propagator"]["kind"], "numeric");
    assert!(side["T"].as_f64().is_some());
}

#[test]
fn evolve_guard_exits_four() {
    let o = qm(&["evolve", "20", "20", "-D", "32"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(o.stdout.is_empty());
}

#[test]
fn evolve_rejects_bad_config() {
    assert_eq!(qm(&["evolve", "1", "1", "-D", "7"]).status.code(), Some(2));
    assert_eq!(
        qm(&["evolve", "1", "1", "--dt", "0.5", "--numeric"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"D": 16, "epsilon": 0.01}"#);
    // |n|+|m| = 9 breaks the D = 16 guard but not D = 32
    let o = qm(&["--config", &cfg, "evolve", "4", "5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = qm(&["--config", &cfg, "evolve", "4", "5", "-D", "32"]);
    assert_eq!(o.status.code(), Some(0));
    let side: Value = serde_json::from_str(&stderr(&o)).unwrap();
    assert_eq!(side["D"], 32);
    assert_eq!(side["epsilon"], 0.01);
    let bad = write(dir.path(), "bad.json", r#"{"D": 16, "typo": 1}"#);
    assert_eq!(
        qm(&["--config", &bad, "evolve", "1", "1"]).status.code(),
        Some(2)
    );
}

#[test]
fn enumerate_class_one() {
    let o = qm(&["enumerate", "1", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 16);
    assert!(lines[0].starts_with("M3 ") && lines[0].contains("P(M0,P(M0,M0))"));
    assert!(lines[4].contains("P(P(M0,M0),T(M0,M0))") && lines[4].contains("(n+m)+(kl)"));
    assert!(lines[15].starts_with("M18 ") && lines[15].contains("T(T(M0,M0),T(M0,M0))"));
    let o = qm(&["enumerate", "0", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
    assert_eq!(qm(&["enumerate", "3", "5"]).status.code(), Some(2));
}

#[test]
fn eval_by_index_and_syntax() {
    let o = qm(&["eval", "7", "1", "2", "3", "4", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["gate_result"], 15);
    assert_eq!(v["oracle_result"], 15);
    assert_eq!(v["agree"], true);
    let o = qm(&["eval", "T(M0,M0)", "3", "4"]);
    assert!(stdout(&o).contains("gate   12"));
    assert_eq!(qm(&["eval", "P(M0", "1"]).status.code(), Some(2));
    assert_eq!(qm(&["eval", "7", "1", "2"]).status.code(), Some(2));
}

#[test]
fn truth_table_or() {
    let o = qm(&["truth-table", "OR"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o),
        "  p   q result\n  0   0      0\n  0   1      1\n  1   0      1\n  1   1      1\n"
    );
    let o = qm(&["truth-table", "not"]);
    assert_eq!(stdout(&o), "  p result\n  0      1\n  1      0\n");
    assert_eq!(qm(&["truth-table", "XOR"]).status.code(), Some(2));
}

#[test]
fn verify_reports() {
    let o = qm(&["verify", "logic", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["passed"], true);
    let again = qm(&["verify", "logic", "--seed", "3"]);
    assert_eq!(o.stdout, again.stdout);
    assert_eq!(qm(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn verify_failure_lists_properties() {
    // the Runge-Kutta step of 0.005 is too coarse for |n| >= 5 at D = 32
    let o = qm(&["verify", "dynamics"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let failed: Vec<&str> = v["failed"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_str().unwrap())
        .collect();
    assert!(failed.contains(&"dynamics.numeric_agreement"));
    assert!(stderr(&o).contains("dynamics.numeric_agreement"));
}
