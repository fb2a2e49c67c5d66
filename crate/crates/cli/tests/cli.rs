use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bootsl::table::Table;
use bootsl_cli::run::snapshot;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bootsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bootsl")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = bootsl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn divisibility_error_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"lv\"\nseed = 1\n[data]\nn = 10\n[[estimators]]\nkind = \"bsl\"\nm = 2\nblock = 3\n");
    let out = bootsl(&["mcmc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("estimators[0].block") && err.contains("data.n=10"), "{err}");
}

#[test]
fn sl_with_one_simulation_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "kind = \"toy\"\nseed = 1\n[[estimators]]\nkind = \"sl\"\nm = 1\n");
    let out = bootsl(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m >= 2"));
}

#[test]
fn missing_seed_is_a_config_error() {
    let out = bootsl(&["simulate", "--preset", "toy", "--out", "/nonexistent/never"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn runtime_failure_exits_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = bootsl(&["simulate", "--preset", "toy", "--seed", "1", "--scale", "0.001", "--out", blocker.join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn toy_replicate_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    run_ok(&["replicate", "--config", fixture("toy_small.toml").to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
    let chains: Vec<_> = std::fs::read_dir(out.join("replicates")).unwrap().collect();
    assert_eq!(chains.len(), 2 * 5);
    let metrics = Table::read_csv(&out.join("replicate_metrics.csv")).unwrap();
    assert_eq!(metrics.rows.len(), 5 * 2);
    let chain = Table::read_csv(&out.join("replicates/chain-e1-bsl-r0.csv")).unwrap();
    assert_eq!(chain.columns, ["theta0", "loglik"]);
    assert_eq!(chain.rows.len(), 300);
}

#[test]
fn lv_mcmc_writes_a_density_per_parameter() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["mcmc", "--config", fixture("lv_small.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    for j in 0..3 {
        let kde = Table::read_csv(&dir.path().join(format!("kde-e0-bsl-theta{j}.csv"))).unwrap();
        assert_eq!(kde.rows.len(), 512);
    }
    let metrics = Table::read_csv(&dir.path().join("mcmc_metrics.csv")).unwrap();
    assert_eq!(metrics.rows.len(), 3);
}

#[test]
fn simulate_writes_data_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["simulate", "--config", fixture("ising_small.toml").to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let data = Table::read_csv(&dir.path().join("data.csv")).unwrap();
    assert_eq!(data.rows.len(), 400);
    assert!(data.column("spin").unwrap().iter().all(|s| *s == 1.0 || *s == -1.0));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"simulate\""));
}

#[test]
fn jobs_do_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = fixture("toy_small.toml");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"]);
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert_eq!(snapshot(&a).unwrap(), snapshot(&b).unwrap());
}
