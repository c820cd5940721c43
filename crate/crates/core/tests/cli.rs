use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aninorm::bench;
use aninorm::StateSpaceModel;
use nalgebra::dmatrix;
use serde_json::Value;

fn aninorm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aninorm"))
        .args(args)
        .output()
        .unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn scalar_model(dir: &Path) -> PathBuf {
    let path = dir.join("f.json");
    StateSpaceModel::new(dmatrix![0.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0])
        .unwrap()
        .save(&path)
        .unwrap();
    path
}

#[test]
fn norms_of_scalar_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = scalar_model(dir.path());
    let model = model.to_str().unwrap();

    let h2 = json(&aninorm(&["h2", "--model", model]))["gamma"]
        .as_f64()
        .unwrap();
    assert!((h2 - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
    let hinf = json(&aninorm(&["hinf", "--model", model]))["gamma"]
        .as_f64()
        .unwrap();
    assert!((hinf - 2.0).abs() < 1e-8);

    let norm = json(&aninorm(&["norm", "--model", model, "--a", "0"]));
    assert!((norm["gamma"].as_f64().unwrap() - h2).abs() < 1e-9);

    let feasible = json(&aninorm(&[
        "feasible", "--model", model, "--a", "0", "--gamma", "1.2",
    ]));
    assert_eq!(feasible["feasible"], Value::Bool(true));
    let infeasible = json(&aninorm(&[
        "feasible", "--model", model, "--a", "0", "--gamma", "1.1",
    ]));
    assert_eq!(infeasible["feasible"], Value::Bool(false));
}

#[test]
fn anisotropy_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let model = scalar_model(dir.path());
    let model = model.to_str().unwrap();

    // |1/(z - 0.5)| = |1/(1 - 0.5/z)| on the unit circle.
    let aniso = json(&aninorm(&["anisotropy", "--model", model]));
    assert!((aniso["mean_anisotropy"].as_f64().unwrap() + 0.5 * 0.75f64.ln()).abs() < 1e-9);
    assert_eq!(aniso["rank_deficient"], Value::Bool(false));

    let verify = json(&aninorm(&[
        "verify",
        "--model",
        model,
        "--a",
        "0.5",
        "--grid",
        "200",
        "--samples",
        "8",
    ]));
    assert_eq!(verify["consistent"], Value::Bool(true));
    assert_eq!(verify["limits"]["pass"], Value::Bool(true));
}

#[test]
fn bench_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let out = json(&aninorm(&[
        "bench",
        "--n",
        "1..2",
        "--m",
        "2",
        "--trials",
        "2",
        "--a-list",
        "0,1",
        "--grid",
        "100",
        "--out",
        csv.to_str().unwrap(),
    ]));
    assert_eq!(out["records"], 2 * 2 * 2 * 2);

    let records = bench::parse_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(records.len(), 16);

    let summary = aninorm(&["summarize", csv.to_str().unwrap()]);
    assert!(summary.status.success());
    let text = String::from_utf8(summary.stdout).unwrap();
    assert!(text.starts_with("kind,n,m,a,"));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = aninorm(&["h2", "--model", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let unstable = dir.path().join("u.json");
    StateSpaceModel::new(dmatrix![1.5], dmatrix![1.0], dmatrix![1.0], dmatrix![0.0])
        .unwrap()
        .save(&unstable)
        .unwrap();
    assert_eq!(
        aninorm(&["h2", "--model", unstable.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    assert_eq!(aninorm(&["norm"]).status.code(), Some(2));
    assert_eq!(
        aninorm(&["bench", "--n", "3..1", "--out", "x.csv"]).status.code(),
        Some(2)
    );
}
