use std::path::Path;
use std::process::{Command, Output};

use gncurv::dataset::load_dataset;

fn gncurv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gncurv"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn gncurv")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_writes_loadable_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = gncurv(&["synth", "--n", "5", "--seed", "1", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 5);
    assert_eq!(load_dataset(&out).unwrap().len(), 5);

    let v = gncurv(&["validate", "--data", path(&out)]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).contains("ok"));
}

#[test]
fn train_without_data_prints_usage() {
    let o = gncurv(&["train", "--outdir", "x"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--data") && err.contains("Usage"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = gncurv(&["synth", "--n", "2", "--out", "x", "--bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_file_names_the_path() {
    let o = gncurv(&["validate", "--data", "/nonexistent/graphs.jsonl"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/graphs.jsonl"));
}

#[test]
fn spectrum_demo_matches_dense_extremes() {
    let dir = tempfile::tempdir().unwrap();
    let o = gncurv(&[
        "spectrum-demo", "--dim", "100", "--lanczos", "100", "--runs", "3", "--probes", "50", "--outdir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    let dense: Vec<f64> = serde_json::from_value(report["dense_eigenvalues"].clone()).unwrap();
    let ritz: Vec<(f64, f64)> = serde_json::from_value(report["ritz"].clone()).unwrap();
    let lo = ritz.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let hi = ritz.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(dense.len(), 100);
    assert!((lo - dense[0]).abs() <= 1e-6 * dense[0].abs());
    assert!((hi - dense[99]).abs() <= 1e-6 * dense[99].abs());
}

#[test]
fn train_then_curvature_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    assert!(gncurv(&["synth", "--n", "30", "--seed", "2", "--out", path(&data)]).status.success());
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{
  "epochs": 2,
  "batch_size": 8,
  "snapshot_epochs": [2],
  "curvature": {"probes": 4, "lanczos_iterations": 5, "runs": 1, "subset": 4},
  "model": {"latent_dim": 3, "steps": 1, "edge_node_hidden": 4, "global_hidden": 4, "head_hidden": [2]}
}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let o = gncurv(&["train", "--data", path(&data), "--config", path(&config), "--outdir", path(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,split,task_label,standardized_mae,loss"));
    let traces = std::fs::read_to_string(run.join("traces.csv")).unwrap();
    assert_eq!(traces.lines().count(), 1 + 4);

    let ck = run.join("checkpoints").join("epoch00002.json");
    let out = dir.path().join("curv");
    let o = gncurv(&[
        "curvature", "--checkpoint", path(&ck), "--data", path(&data), "--task", "1", "--probes", "6", "--lanczos",
        "5", "--outdir", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(out.join("trace_task1.csv")).unwrap();
    assert_eq!(rows.lines().nth(1).unwrap().split(',').nth(1), Some("task1"));
    assert!(out.join("density_task1.json").exists());

    // A checkpoint does not accept data it was not trained on.
    let other = dir.path().join("other.jsonl");
    assert!(gncurv(&["synth", "--n", "30", "--seed", "3", "--out", path(&other)]).status.success());
    let o = gncurv(&[
        "curvature", "--checkpoint", path(&ck), "--data", path(&other), "--task", "0", "--outdir", path(&out),
    ]);
    assert!(!o.status.success());
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    assert!(gncurv(&["synth", "--n", "10", "--out", path(&data)]).status.success());
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"epochs": 1, "learning_rate": 0.1}"#).unwrap();
    let o = gncurv(&["train", "--data", path(&data), "--config", path(&config), "--outdir", path(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}
