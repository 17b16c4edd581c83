use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bilap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilap")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn krein_kernel_on_star() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("star3.json");
    fs::write(&graph, r#"{"vertices": 4, "edges": [
        {"source": 0, "target": 1, "length": 1.0},
        {"source": 0, "target": 2, "length": 1.0},
        {"source": 0, "target": 3, "length": 1.0}]}"#).unwrap();
    let out = bilap(&["metric", "kernel", "--preset", "krein", "--graph", graph.to_str().unwrap(), "--mesh", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["result"]["kernel_dimension"], 7);
    assert_eq!(doc["config"]["condition"], "krein");
    assert_eq!(doc["config"]["seed"], 42);
    assert_eq!(doc["schema_version"], "1");
}

#[test]
fn non_hermitian_pair_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cb.json");
    let row = |k: usize, extra: Option<usize>| {
        let cells: Vec<String> = (0..4)
            .map(|j| if j == k || Some(j) == extra { "[1,0]".into() } else { "[0,0]".to_string() })
            .collect();
        format!("[{}]", cells.join(","))
    };
    let c: Vec<String> = (0..4).map(|k| row(k, None)).collect();
    let b = format!("[{},[{}],[{}],[{}]]", row(9, Some(1)), ["[0,0]"; 4].join(","), ["[0,0]"; 4].join(","), ["[0,0]"; 4].join(","));
    fs::write(&path, format!(r#"{{"C": [{}], "B": {b}}}"#, c.join(","))).unwrap();
    let out = bilap(&["conditions", "verify", "--cb", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CB* not Hermitian"));
}

#[test]
fn convert_roundtrips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = bilap(&["conditions", "convert", "--preset", "friedrichs", "--graph", "star:3", "--out", out_dir]);
    assert!(out.status.success());
    let cb = dir.path().join("converted.json");
    let out = bilap(&["conditions", "verify", "--cb", cb.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout_json(&out)["result"]["dim_Y"], 4);
}

#[test]
fn discrete_commands() {
    let out = bilap(&["discrete", "check", "--graph", "path:3", "--t", "0.1"]);
    assert!(out.status.success());
    let doc = stdout_json(&out);
    assert_eq!(doc["result"]["semigroup"].as_array().unwrap().len(), 3);
    assert_eq!(doc["config"]["command"], "discrete check");

    let out = bilap(&["discrete", "evolve", "--graph", "path:3", "--f0", "1,0,0", "--times", "0.1:1:3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with('#'));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 9);
    assert!(String::from_utf8_lossy(&out.stderr).contains("t* = 0.3907"));

    let out = bilap(&["discrete", "gap", "--graph", "cycle:5"]);
    assert_eq!(stdout_json(&out)["result"]["within"], true);
}

#[test]
fn scan_is_reproducible_under_a_seed() {
    let run = |seed: &str| bilap(&["discrete", "scan", "--graph", "star:4", "--trials", "20", "--seed", seed]).stdout;
    assert_eq!(run("7"), run("7"));
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(bilap(&["metric", "kernel", "--graph", "/nonexistent.json"]).status.code(), Some(2));
    assert_eq!(bilap(&["metric", "kernel", "--graph", "path:2", "--preset", "bogus"]).status.code(), Some(2));
    assert_eq!(bilap(&["discrete", "evolve", "--graph", "path:3", "--f0", "1,0"]).status.code(), Some(2));
    assert_eq!(bilap(&["metric", "spectrum", "--graph", "path:2", "--tol", "oops"]).status.code(), Some(2));
}

#[test]
fn metric_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = bilap(&["metric", "evolve", "--graph", "path:2", "--mesh", "4", "--times", "0.01:0.1:3", "--f0", "const:1", "--out", out_dir]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("trajectory.csv").exists());
    let out = bilap(&["metric", "classify", "--graph", "star:3", "--preset", "friedrichs", "--mesh", "4"]);
    assert_eq!(stdout_json(&out)["result"]["verdict"], "eventually_sub_markovian");
}
