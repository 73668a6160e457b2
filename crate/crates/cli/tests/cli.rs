use assert_cmd::Command;
use predicates::prelude::*;
use std::fs;

fn cmd() -> Command {
    Command::cargo_bin("ogp-modlab").unwrap()
}

fn write_config(dir: &std::path::Path, body: serde_json::Value) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path
}

#[test]
fn landscape_row_count_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 120, "k": 3, "a": 3.0, "b": 1.0, "omega": 8.0},
            "seeds": [0, 1, 2, 3, 4],
            "kind": "landscape",
            "d_grid": (0..11).map(|j| j as f64 / 30.0).collect::<Vec<_>>(),
            "search_budget": 3
        }),
    );
    cmd().args(["landscape", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let csv = fs::read_to_string(out.join("landscape.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    // One comment line, one header, 11 points x 5 seeds.
    assert_eq!(rows.len(), 2 + 55);
    assert!(rows[0].starts_with("# config_hash="));
    assert_eq!(rows[1], "d,t,h,modularity_theory,H_empirical,seed");
    // A rerun with the same config must be byte-identical.
    cmd().args(["landscape", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    assert_eq!(csv, fs::read_to_string(out.join("landscape.csv")).unwrap());
    // Per-run metadata files exist.
    assert!(out.join("landscape_seed0.json").exists());
    assert!(out.join("landscape_seed4.json").exists());
}

#[test]
fn oracle_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 30, "k": 3, "a": 3.0, "b": 1.0, "omega": 5.0},
            "seeds": [0],
            "kind": "oracle",
            "t": 0.5,
            "resolution": 8
        }),
    );
    cmd().args(["oracle", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert_eq!(meta["closed_form"].as_f64().unwrap(), 4.0);
    assert!(meta["grid_max"].as_f64().unwrap() <= 4.0 + 1e-12);
    assert!(meta["gap"].as_f64().unwrap().abs() <= 1e-12);
    assert_eq!(meta["artifact_version"].as_u64().unwrap(), 1);
    assert!(meta["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn greedy_trace_format() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 90, "k": 3, "a": 4.0, "b": 1.0, "omega": 6.0},
            "seeds": [7],
            "kind": "greedy",
            "start": {"type": "decoy", "i": 0, "j": 1},
            "max_steps": 500,
            "sample_every": 50
        }),
    );
    cmd().args(["greedy", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let csv = fs::read_to_string(out.join("greedy_seed7_trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "step,modularity,distance,region");
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert!(["close", "between", "far"].contains(&fields[3]));
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("greedy_seed7.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"].as_u64().unwrap(), 7);
    assert!(meta["nu1"].as_f64().unwrap() > 0.0);
    assert!(out.join("greedy_seed7_terminal.labels").exists());
}

#[test]
fn mcmc_seed_override_runs_single_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 60, "k": 3, "a": 4.0, "b": 1.0, "omega": 6.0},
            "seeds": [0, 1, 2],
            "kind": "mcmc",
            "start": {"type": "planted"},
            "beta": 5.0,
            "max_steps": 2000,
            "sample_every": 500
        }),
    );
    cmd()
        .args(["mcmc", "--config"])
        .arg(&config)
        .args(["--seed", "9", "--out"])
        .arg(&out)
        .assert()
        .success();
    assert!(out.join("mcmc_seed9_trace.csv").exists());
    assert!(!out.join("mcmc_seed0_trace.csv").exists());
}

#[test]
fn score_accepts_graph_and_partition_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    // Two triangles: planted for n=6, k=2 is {0,1,2} vs {3,4,5}.
    fs::write(tmp.path().join("graph.edges"), "6 6\n0 1\n0 2\n1 2\n3 4\n3 5\n4 5\n").unwrap();
    fs::write(tmp.path().join("labels.txt"), "0\n0\n0\n1\n1\n1\n").unwrap();
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 6, "k": 2, "a": 3.0, "b": 1.0, "omega": 2.0},
            "seeds": [0],
            "graph": tmp.path().join("graph.edges"),
            "kind": "score",
            "start": {"type": "file", "path": tmp.path().join("labels.txt")},
            "nu": 0.4
        }),
    );
    cmd().args(["score", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let csv = fs::read_to_string(out.join("score.csv")).unwrap();
    let row = csv.lines().nth(2).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.5);
    assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    // Unknown kind.
    let bad = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 30, "k": 3, "a": 3.0, "b": 1.0, "omega": 5.0},
            "seeds": [0],
            "kind": "nonsense"
        }),
    );
    cmd()
        .args(["score", "--config"])
        .arg(&bad)
        .assert()
        .code(1)
        .stderr(predicate::str::contains("invalid config"));
    // Verb/kind mismatch.
    let oracle = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 30, "k": 3, "a": 3.0, "b": 1.0, "omega": 5.0},
            "seeds": [0],
            "kind": "oracle",
            "t": 0.5,
            "resolution": 8
        }),
    );
    cmd().args(["landscape", "--config"]).arg(&oracle).assert().code(1);
    // Missing arguments.
    cmd().arg("landscape").assert().code(1);
}

#[test]
fn io_errors_exit_three() {
    cmd().args(["score", "--config", "/nonexistent/config.json"]).assert().code(3);
}

#[test]
fn verify_quick_passes() {
    cmd()
        .args(["verify", "quick"])
        .assert()
        .success()
        .stdout(predicate::str::contains("all 6 criteria passed"));
}

#[test]
fn gibbs_oracle_table_sums_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 8, "k": 2, "a": 3.0, "b": 1.0, "omega": 2.0},
            "seeds": [0],
            "kind": "gibbs-oracle",
            "beta": 2.0
        }),
    );
    cmd().args(["gibbs-oracle", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let csv = fs::read_to_string(out.join("gibbs_oracle.csv")).unwrap();
    let total: f64 = csv
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(csv.lines().count(), 2 + 256);
}

#[test]
fn ogp_cert_runs_clean_on_strong_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "model": {"n": 2000, "k": 3, "a": 3.0, "b": 1.0, "omega": 50.0},
            "seeds": [5],
            "kind": "ogp-cert",
            "grid_points": 12,
            "greedy_steps": 20000
        }),
    );
    cmd().args(["ogp-cert", "--config"]).arg(&config).arg("--out").arg(&out).assert().success();
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ogp_cert_seed5.json")).unwrap())
            .unwrap();
    assert!(meta["band_violations"].as_array().unwrap().is_empty());
    assert!(meta["far_witness"].as_str().is_some());
}
