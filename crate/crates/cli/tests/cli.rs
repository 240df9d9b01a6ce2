//! End-to-end checks of the `hmdim` binary: exit codes, artifact layout,
//! and the wire formats promised to downstream tooling.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hmdim")
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

#[test]
fn schema_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    // probabilities sum to 0.9
    std::fs::write(
        &bad,
        r#"{
            "seed": 1,
            "model": { "kind": "free", "rank": 2 },
            "measure": { "model": "free", "atoms": [
                { "g": "a", "p": 0.45 }, { "g": "A", "p": 0.45 }
            ] }
        }"#,
    )
    .unwrap();
    let out = run(&[
        "drift",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{
            "seed": 1,
            "model": { "kind": "free", "rank": 2 },
            "measure": { "model": "free", "atoms": [
                { "g": "a", "p": 0.5 }, { "g": "A", "p": 0.5 }
            ] },
            "surprise": true
        }"#,
    )
    .unwrap();
    let out = run(&["drift", "--config", bad.to_str().unwrap(), "--out", "/tmp/unused"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));
}

#[test]
fn missing_output_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("no-out.json");
    std::fs::write(
        &cfg,
        r#"{
            "seed": 1,
            "model": { "kind": "free", "rank": 2 },
            "measure": { "model": "free", "atoms": [
                { "g": "a", "p": 0.5 }, { "g": "A", "p": 0.5 }
            ] }
        }"#,
    )
    .unwrap();
    let out = run(&["drift", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_on_biased_config_reports_tiny_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "oracle",
        "--config",
        bundled("biased-f2.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert!(doc["residual"].as_f64().unwrap() <= 1e-10);
    assert!(doc["q"]["a"].as_f64().unwrap() > doc["q"]["A"].as_f64().unwrap());
    assert_eq!(doc["kernel"]["a"]["A"].as_f64().unwrap(), 0.0);
    let drift = doc["drift"].as_array().unwrap();
    assert!(drift[1].as_f64().unwrap() <= drift[0].as_f64().unwrap());
    assert!(doc["entropy"].as_f64().unwrap() > 0.0);
    // generic summary sits beside the oracle file
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["ratio_h_over_l"].as_f64().unwrap() > 0.0);
}

#[test]
fn verify_formula_quick_run_produces_consistent_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify-formula",
        "--config",
        bundled("srw-f2-quick.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"].as_u64(), Some(31337));
    assert_eq!(summary["model"].as_str(), Some("free-2"));
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    // dimension-formula quantities and checks
    let ratio = summary["ratio_h_over_l"].as_f64().unwrap();
    assert!((ratio - 1.0986).abs() < 0.05, "ratio {ratio}");
    let dim = summary["dim"]["median"].as_f64().unwrap();
    assert!((dim - 1.0986).abs() < 0.12, "dim {dim}");
    assert_eq!(summary["checks"]["upper_bound"]["pass"].as_bool(), Some(true));
    assert_eq!(summary["checks"]["stationarity"]["pass"].as_bool(), Some(true));
    assert_eq!(summary["checks"]["drift_routes_agree"].as_bool(), Some(true));
    assert_eq!(summary["checks"]["entropy_routes_agree"].as_bool(), Some(true));
    assert_eq!(summary["checks"]["dim_matches_ratio"].as_bool(), Some(true));
    assert_eq!(summary["failed_checks"].as_array().unwrap().len(), 0);
    // artifacts for downstream plotting
    assert!(dir.path().join("slopes.csv").exists());
    assert!(dir.path().join("summaries.csv").exists());
    assert!(dir.path().join("metadata.json").exists());

    // plotdata reshapes the run
    let plot = run(&["plotdata", "--results", dir.path().to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0));
    let hist = std::fs::read_to_string(dir.path().join("slope_histogram.csv")).unwrap();
    assert!(hist.lines().count() > 10);
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, summary["dim"]["samples"].as_u64().unwrap() as usize);
}

#[test]
fn diagnostics_and_continuity_quick_runs_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "diagnostics",
        "--config",
        bundled("srw-f2-quick.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["checks"]["shadow_hit"]["fraction"].as_f64(), Some(1.0));
    assert!(summary["checks"]["shadow_hit"]["control_fraction"].as_f64().unwrap() < 1.0);
    assert_eq!(summary["checks"]["eventA"]["nondecreasing"].as_bool(), Some(true));
    assert!(dir.path().join("event_a.csv").exists());

    let dir2 = tempfile::tempdir().unwrap();
    let out = run(&[
        "continuity",
        "--config",
        bundled("srw-f2-quick.json").to_str().unwrap(),
        "--out",
        dir2.path().to_str().unwrap(),
        "--threads",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir2.path().join("summary.json")).unwrap()).unwrap();
    let rows = summary["continuity"].as_array().unwrap();
    assert_eq!(rows.len(), 4); // baseline + three perturbations
    assert!(dir2.path().join("continuity.csv").exists());
}

#[test]
fn plotdata_on_empty_dir_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plotdata", "--results", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sl2_oracle_is_rejected_as_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "oracle",
        "--config",
        bundled("sanov-sl2z.json").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
