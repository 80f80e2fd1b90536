use std::fs;
use std::path::Path;
use std::process::Command;

use spinfluid::bohmion::conserved;
use spinfluid::pauli::observables;
use spinfluid_cli::io::{read_ensemble, read_field};
use spinfluid_cli::presets::preset;
use spinfluid_cli::run::{pauli_totals, snapshot_path};
use spinfluid_cli::{parse_config, run, ConfigError, RunOptions, Status};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinfluid"))
}

fn last_row(out: &Path, width: usize) -> Vec<f64> {
    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let row: Vec<f64> = text.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    row[..width].to_vec()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * x.abs().max(1.0))
}

#[test]
fn bohmion_snapshot_reload_reproduces_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = preset("two-bohmion-scatter").unwrap();
    raw.steps = Some(20);
    raw.out_dir = Some(dir.path().to_path_buf());
    let cfg = raw.validate().unwrap();
    run(&cfg, &RunOptions::default()).unwrap();
    let e = read_ensemble(&snapshot_path(dir.path(), "bohmions", 20)).unwrap();
    let c = conserved(&e, &cfg.physical, &cfg.quadrature).unwrap();
    let reloaded = [20.0 * cfg.dt, c.energy, c.momentum.x, c.momentum.y, c.jz, c.mu_norm_min(), c.mu_norm_max()];
    assert!(close(&reloaded, &last_row(dir.path(), 7), 1e-12));
}

#[test]
fn field_snapshot_reload_reproduces_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = preset("rashba-packet-64").unwrap();
    raw.steps = Some(20);
    raw.out_dir = Some(dir.path().to_path_buf());
    let cfg = raw.validate().unwrap();
    run(&cfg, &RunOptions::default()).unwrap();
    let f = read_field(&snapshot_path(dir.path(), "field", 20)).unwrap();
    let t = pauli_totals(20.0 * cfg.dt, &f, &observables(&f, &cfg.physical), &cfg.physical);
    let reloaded = [t.t, t.energy, t.px, t.py, t.jz, t.mu_norm_min, t.mu_norm_max];
    assert!(close(&reloaded, &last_row(dir.path(), 7), 1e-12));
}

#[test]
fn summary_records_schema_and_status() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = preset("n1-precession").unwrap();
    raw.out_dir = Some(dir.path().to_path_buf());
    let outcome = run(&raw.validate().unwrap(), &RunOptions::default()).unwrap();
    assert_eq!(outcome.summary.status, Status::Pass);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "pass");
    assert_eq!(json["diagnostics_schema"], 1);
    assert_eq!(json["checks"][0]["name"], "precession");
    let resolved = fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert!(parse_config(&resolved).unwrap().validate().is_ok());
}

#[test]
fn validation_reports_every_field() {
    let err = parse_config("mode = \"pauli\"\ndt = -0.1\nsteps = 0\n").unwrap().validate().unwrap_err();
    let ConfigError::Validation(msgs) = err else { panic!("expected validation error") };
    for field in ["dt", "steps", "grid"] {
        assert!(msgs.iter().any(|m| m.starts_with(field)), "{field} missing from {msgs:?}");
    }
    assert!(matches!(parse_config("speed = 3\n"), Err(ConfigError::Parse(_))));
}

#[test]
fn binary_lists_presets() {
    let out = bin().arg("--list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("n1-precession") && text.contains("rashba-packet-64"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| bin().args(args).output().unwrap().status.code();
    assert_eq!(code(&["--preset", "nope"]), Some(2));
    assert_eq!(code(&["--config", "/nonexistent/scenario.toml"]), Some(1));
    let out = dir.path().join("neg");
    assert_eq!(code(&["--preset", "n1-precession", "--dt", "-1", "--out", out.to_str().unwrap()]), Some(2));

    let strict = dir.path().join("strict.toml");
    fs::write(
        &strict,
        "mode = \"pauli\"\ndt = 0.05\nsteps = 4\n[grid]\nnx = 32\nlx = 24.0\n[wavepacket]\nsigma = 2.0\n[thresholds]\npurity = 1e-30\n",
    )
    .unwrap();
    let out = dir.path().join("strict");
    let args = ["--config", strict.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(code(&args), Some(0));
    assert_eq!(code(&[&args[..], &["--check"]].concat()), Some(3));

    let out = dir.path().join("ok");
    let run = bin()
        .args(["--preset", "n1-precession", "--check", "--threads", "2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8(run.stdout).unwrap().contains("PASS precession"));
}
