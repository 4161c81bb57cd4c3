use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn polysep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polysep")).args(args).current_dir(dir).output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

fn gen_wedge(dir: &Path) {
    let out = polysep(
        dir,
        &["gen", "--t", "2", "--gamma", "0.2", "--m", "50", "--dim", "2", "--seed", "7", "--out", "wedge.csv"],
    );
    assert!(out.status.success());
}

#[test]
fn train_eval_predict_round() {
    let dir = tempfile::tempdir().unwrap();
    gen_wedge(dir.path());
    let out = polysep(
        dir.path(),
        &["train", "--data", "wedge.csv", "--mode", "proper", "--t", "2", "--gamma", "0.2", "--out", "m.json"],
    );
    assert!(out.status.success());
    let r = report(&out);
    assert!(r["halfspaces"].as_u64().unwrap() <= 2);
    assert_eq!(r["training_errors"], 0);

    let r = report(&polysep(dir.path(), &["eval", "--model", "m.json", "--data", "wedge.csv"]));
    assert_eq!(r["error_rate"], 0.0);
    assert_eq!(r["n"], 50);

    // predictions on the model's own support points match their stored labels
    let model: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    let mut rows = String::new();
    let mut labels = Vec::new();
    for entry in model["support"].as_array().unwrap() {
        let enc: Vec<String> = entry[1].as_array().unwrap().iter().map(|v| v.to_string()).collect();
        rows.push_str(&enc.join(","));
        rows.push('\n');
        labels.push(entry[2].as_i64().unwrap());
    }
    std::fs::write(dir.path().join("support.csv"), rows).unwrap();
    assert!(polysep(dir.path(), &["predict", "--model", "m.json", "--data", "support.csv", "--out", "p.csv"])
        .status
        .success());
    let predicted: Vec<i64> = std::fs::read_to_string(dir.path().join("p.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(predicted, labels);
}

#[test]
fn infeasible_training_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    gen_wedge(dir.path());
    let out = polysep(
        dir.path(),
        &["train", "--data", "wedge.csv", "--mode", "proper", "--t", "1", "--gamma", "0.2", "--out", "m.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["outcome"], "no_separating_polyhedron");
    assert!(!dir.path().join("m.json").exists());

    std::fs::write(dir.path().join("same.csv"), "0.3,0,1\n0.3,0,-1\n").unwrap();
    let out =
        polysep(dir.path(), &["train", "--data", "same.csv", "--mode", "lp", "--gamma", "0.1", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["outcome"], "not_gamma_separable");
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "0.5,0,2\n").unwrap();
    let out = polysep(d, &["train", "--data", "bad.csv", "--gamma", "0.2", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));

    std::fs::write(d.join("big.csv"), "2,0,1\n0,1,-1\n").unwrap();
    assert_eq!(
        polysep(d, &["train", "--data", "big.csv", "--gamma", "0.2", "--mode", "lp", "--out", "m.json"]).status.code(),
        Some(2)
    );
    assert_eq!(
        polysep(d, &["train", "--data", "big.csv", "--gamma", "0.2", "--kernel", "rbf:sigma=-1", "--out", "m.json"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        polysep(d, &["pac-plan", "--epsilon", "0.1", "--delta", "0.1", "--gamma", "0.5"]).status.code(),
        Some(2)
    );
    assert_eq!(
        polysep(d, &["pac-plan", "--epsilon", "0.6", "--delta", "0.1", "--gamma", "0.5", "--d", "2"]).status.code(),
        Some(2)
    );

    gen_wedge(d);
    assert!(polysep(d, &["train", "--data", "wedge.csv", "--t", "2", "--gamma", "0.2", "--out", "m.json"])
        .status
        .success());
    std::fs::write(d.join("empty.csv"), "").unwrap();
    assert_eq!(polysep(d, &["eval", "--model", "m.json", "--data", "empty.csv"]).status.code(), Some(2));
    std::fs::write(d.join("wide.csv"), "0.1,0.2,0.3,0.4\n").unwrap();
    assert_eq!(
        polysep(d, &["predict", "--model", "m.json", "--data", "wide.csv", "--out", "p.csv"]).status.code(),
        Some(2)
    );
}

#[test]
fn autoscale_is_recorded_in_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("big.csv"), "2,0,1\n1.5,0.5,1\n-2,0,-1\n").unwrap();
    let out =
        polysep(d, &["train", "--data", "big.csv", "--gamma", "0.2", "--mode", "lp", "--autoscale", "--out", "m.json"]);
    assert!(out.status.success());
    assert_eq!(report(&out)["input_scale"], 2.0);
    // raw-scale queries are rescaled by the model
    std::fs::write(d.join("q.csv"), "1.8,0\n-1.8,0\n").unwrap();
    assert!(polysep(d, &["predict", "--model", "m.json", "--data", "q.csv", "--out", "p.csv"]).status.success());
    assert_eq!(std::fs::read_to_string(d.join("p.csv")).unwrap(), "label\n1\n-1\n");
}

#[test]
fn pac_plan_and_oracle_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = report(&polysep(
        d,
        &["pac-plan", "--epsilon", "0.1", "--delta", "0.05", "--gamma", "0.5", "--t", "4", "--d", "3"],
    ));
    assert_eq!(r["vc_dimension"], 24.0);
    assert_eq!(r["sample_size"], 270.0);

    std::fs::write(d.join("pair.csv"), "0.5,0,1\n-0.5,0,-1\n").unwrap();
    let r = report(&polysep(d, &["oracle", "--data", "pair.csv", "--gamma", "0.2"]));
    assert_eq!(r["separable"], true);
    let r = report(&polysep(d, &["oracle", "--data", "pair.csv", "--gamma", "0.6"]));
    assert_eq!(r["separable"], false);
}

#[test]
fn generator_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = polysep(dir.path(), &["gen", "--gamma", "0.95", "--m", "10", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
