mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mec_cache::harness::experiments::{run_experiment, ExperimentId, ExperimentSpec};
use mec_cache::harness::metrics::{read_rows, write_rows};
use mec_cache::harness::plotdata::emit_plotdata;
use mec_cache::Error;

use common::tiny_scenario;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mec-cache")).args(args).output().unwrap()
}

fn write_scenario(dir: &Path, seed: u64) -> String {
    let path = dir.join("scenario.toml");
    fs::write(&path, toml::to_string(&tiny_scenario(seed)).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_slot_run_writes_one_row_per_scheme() {
    let mut spec = ExperimentSpec::new(ExperimentId::Fig2_3, tiny_scenario(1));
    spec.horizon = 1;
    let out = run_experiment(&spec).unwrap();
    assert_eq!(out.rows.len(), spec.schemes.len());
    assert!(out.rows.iter().all(|r| r.t == 0));
    let dir = tempfile::tempdir().unwrap();
    out.write(dir.path()).unwrap();
    assert_eq!(read_rows(dir.path().join("metrics.csv")).unwrap().len(), spec.schemes.len());
}

#[test]
fn cli_run_is_byte_identical_for_same_seed() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), 5);
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = cli(&["run", "fig2_3", "--scenario", &scenario, "--horizon", "6", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        files.push(fs::read(out.join("metrics.csv")).unwrap());
    }
    assert!(!files[0].is_empty());
    assert_eq!(files[0], files[1]);

    let other = dir.path().join("c");
    let o = cli(&[
        "run",
        "fig2_3",
        "--scenario",
        &scenario,
        "--horizon",
        "6",
        "--seed",
        "99",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_ne!(files[0], fs::read(other.join("metrics.csv")).unwrap());
}

#[test]
fn plotdata_from_run_output() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), 2);
    let out = dir.path().join("run");
    let o = cli(&["run", "fig2_3", "--scenario", &scenario, "--horizon", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let metrics = out.join("metrics.csv");

    let fig2 = dir.path().join("fig2.csv");
    let o = cli(&["plotdata", "fig2", "--in", metrics.to_str().unwrap(), "--out", fig2.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(&fig2).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,centralized,myopic,noncooperative,oreo");
    assert_eq!(lines.count(), 4);

    let t = emit_plotdata(&metrics, "fig3", &dir.path().join("fig3.csv"), Some(8.0)).unwrap();
    assert_eq!(t.column("Q").unwrap(), vec![8.0; 4]);
    let t = emit_plotdata(&metrics, "fig8", &dir.path().join("fig8.csv"), None).unwrap();
    assert_eq!(t.header, ["t", "demand", "bs0", "bs1", "bs2", "bs3"]);
}

#[test]
fn plotdata_on_empty_metrics_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let metrics = dir.path().join("metrics.csv");
    write_rows(&metrics, &[]).unwrap();
    let out = dir.path().join("fig2.csv");
    let t = emit_plotdata(&metrics, "fig2", &out, None).unwrap();
    assert!(t.rows.is_empty());
    assert_eq!(fs::read_to_string(&out).unwrap().trim(), "t");
}

#[test]
fn plotdata_rejects_foreign_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    fs::write(&input, "a,b\n1,2\n").unwrap();
    let err = emit_plotdata(&input, "fig2", &dir.path().join("o.csv"), None).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
    let err = emit_plotdata(&input, "fig4", &dir.path().join("o.csv"), None).unwrap_err();
    assert!(matches!(err, Error::Schema(_)), "{err}");
}

#[test]
fn mg1check_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mg1.toml");
    fs::write(
        &cfg,
        "arrival_rate = 20.0\nweights = [1.0, 2.0]\nmeans = [0.2, 0.3]\ncpu_freq = 10.0\ntasks = 200000\nseed = 3\n",
    )
    .unwrap();
    let o = cli(&["mg1check", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let err: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("relative error"))
        .and_then(|s| s.trim().trim_end_matches('%').parse().ok())
        .unwrap();
    assert!(err < 3.0, "{stdout}");
}

#[test]
fn unknown_experiment_fails_cleanly() {
    let o = cli(&["run", "fig99"]);
    assert!(!o.status.success());
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(matches!("fig99".parse::<ExperimentId>(), Err(Error::UnknownExperiment(_))));
}

#[test]
fn invalid_scenario_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[control]\ntau = -1.0\n").unwrap();
    let o = cli(&["run", "fig2_3", "--scenario", path.to_str().unwrap(), "--horizon", "1"]);
    assert!(!o.status.success());
    fs::write(&path, "bogus_key = 1\n").unwrap();
    let o = cli(&["run", "fig2_3", "--scenario", path.to_str().unwrap(), "--horizon", "1"]);
    assert!(!o.status.success());
}
