use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const MU: &str = r#"{"d": 1, "N": 4, "atoms": [
    {"probs": [0.1, 0.9], "weight": 0.8},
    {"probs": [0.9, 0.1], "weight": 0.2}]}"#;

fn exchwalk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exchwalk"))
        .current_dir(dir)
        .env_remove("EXCHWALK_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn velocity_config(dir: &Path) -> &'static str {
    let text = format!(
        r#"{{"kind": "velocity", "seed": 1, "replicas": 6, "workers": 1, "mu": {MU},
            "velocity": {{"gammas": [0.5, 5], "steps": 150}}}}"#
    );
    fs::write(dir.join("sweep.json"), text).unwrap();
    "sweep.json"
}

/// `e^{-2} I_0(2)` from the power series of `I_0`.
fn bessel_oracle() -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..40 {
        term /= (k * k) as f64;
        sum += term;
    }
    (-2.0f64).exp() * sum
}

#[test]
fn validate_config_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = velocity_config(dir.path());
    let out = exchwalk(dir.path(), &["--out", "echo", "validate-config", "--config", cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("echo/config.json")).unwrap()).unwrap();
    assert_eq!(echo["velocity"]["epsilon"], 0.1);
    assert_eq!(echo["confidence"], 0.99);
    assert_eq!(stdout_json(&out)["valid"], true);
}

#[test]
fn kernel_table_matches_bessel() {
    let dir = tempfile::tempdir().unwrap();
    let out = exchwalk(dir.path(), &["kernel", "--d", "1", "--gamma", "1", "--t", "1", "--table", "out.csv"]);
    assert!(out.status.success());
    let table = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let row = table.lines().find(|l| l.starts_with("0,")).unwrap();
    let value: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - bessel_oracle()).abs() < 1e-14 * bessel_oracle());
}

#[test]
fn experiment_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = velocity_config(dir.path());
    for name in ["a", "b"] {
        let out = exchwalk(dir.path(), &["--out", name, "experiment", "velocity", "--config", cfg, "--seed", "7"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout_json(&out)["config"]["seed"], 7);
    }
    for file in ["velocity.csv", "velocity.json", "config.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(names.iter().all(|n| !n.contains("staging")), "{names:?}");
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = velocity_config(dir.path());
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_exchwalk"));
        cmd.current_dir(dir.path()).env_remove("EXCHWALK_SEED");
        if let Some(e) = env {
            cmd.env("EXCHWALK_SEED", e);
        }
        cmd.args(["--out", "echo", "validate-config", "--config", cfg]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        stdout_json(&cmd.output().unwrap())["config"]["seed"].clone()
    };
    assert_eq!(run(None, None), 1);
    assert_eq!(run(Some("9"), None), 9);
    assert_eq!(run(Some("9"), Some("4")), 4);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"kind": "velocity", "colour": 1}"#).unwrap();
    let out = exchwalk(dir.path(), &["validate-config", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"], "schema");

    let zero = r#"{"kind": "velocity", "mu": {"d": 1, "N": 2, "atoms": [{"probs": [0.5, 0.5], "weight": 1}]}}"#;
    fs::write(dir.path().join("zero.json"), zero).unwrap();
    let out = exchwalk(dir.path(), &["--out", "z", "experiment", "velocity", "--config", "zero.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout_json(&out)["error"], "precondition");
    assert!(!dir.path().join("z").exists());

    let big = format!(
        r#"{{"kind": "velocity", "replicas": 1, "mu": {MU},
            "velocity": {{"gammas": [50], "steps": 2000000, "engine": "window"}}}}"#
    );
    fs::write(dir.path().join("big.json"), big).unwrap();
    let out = exchwalk(dir.path(), &["--out", "w", "experiment", "velocity", "--config", "big.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stdout_json(&out)["error"], "resource");

    let out = exchwalk(dir.path(), &["schedule", "--base", "64", "--target", "63", "--epsilon", "0.1", "--v", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_and_schedule() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("mu.json"), MU).unwrap();
    let out = exchwalk(
        dir.path(),
        &["--out", "walk", "simulate", "--mu", "mu.json", "--gamma", "2", "--steps", "50", "--seed", "3"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("walk/walk.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,x_1,X_v"));
    assert_eq!(csv.lines().count(), 52);

    let out = exchwalk(
        dir.path(),
        &[
            "--out", "sched", "schedule", "--base", "27", "--target", "81", "--epsilon", "0.1", "--mu", "mu.json",
            "--delta", "0.2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["schedule"]["times"], serde_json::json!([9, 81]));
    let lower = &v["dominating_laws"]["lower"];
    let mean = lower["mean"].as_f64().unwrap();
    assert!((mean - lower["predicted_mean"].as_f64().unwrap()).abs() < 1e-12);
    assert!(dir.path().join("sched/schedule.json").exists());
}
