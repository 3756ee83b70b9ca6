use std::path::Path;
use std::process::{Command, Output};

use multifrac::kernels::KernelSpec;
use multifrac::noise::cumulate;
use multifrac::simulate::{SimConfig, SimPlan};
use multifrac::UniformGrid;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multifrac")).args(args).env_remove("MULTIFRAC_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn covariance_examples() {
    let o = run(&["covariance", "fbm", "--H", "0.5", "--t", "1", "--s", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1.0");
    let m = run(&["covariance", "mbm", "--Ht", "0.3", "--Hs", "0.3", "--t", "1", "--s", "2"]);
    let f = run(&["covariance", "fbm", "--H", "0.3", "--t", "1", "--s", "2"]);
    assert_eq!(stdout(&m), stdout(&f));
    let i = run(&["covariance", "increment", "--H", "0.5", "--delta", "1"]);
    assert_eq!(stdout(&i).trim(), "0.0");
    let s = run(&["covariance", "stationary", "--t", "1", "--s", "1", "--H-values", "0.4,0.6"]);
    let v: f64 = stdout(&s).trim().parse().unwrap();
    assert!((v - 1.0764559024979144).abs() < 1e-12);
    let l = run(&["covariance", "local-limit", "--r", "1", "--v", "-1", "--H", "0.5"]);
    assert_eq!(stdout(&l).trim(), "0.0");
}

#[test]
fn covariance_errors_are_config_errors() {
    assert_eq!(run(&["covariance", "fbm", "--H", "1.5", "--t", "1", "--s", "2"]).status.code(), Some(2));
    let strict = run(&["covariance", "mbm", "--Ht", "0.4", "--Hs", "0.6", "--t", "1", "--s", "1", "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
    assert_eq!(run(&["covariance", "stationary", "--t", "1", "--s", "1"]).status.code(), Some(2));
    assert_eq!(run(&["covariance", "nonsense"]).status.code(), Some(2));
}

#[test]
fn covariance_table_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cov.csv");
    let o = run(&["covariance", "fbm", "--H", "0.5", "--t", "1", "--s", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,s,value,model\n1,2,"));
}

#[test]
fn brownian_simulation_matches_the_driver() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bm.json", r#"{"schema": 1, "seed": 42, "grid": {"t_max": 1, "n_cells": 1024}}"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,value,H");
    assert_eq!(lines.len() - 1, 1025);

    let sim = SimConfig::new(UniformGrid::new(0.0, 1.0, 1024).unwrap());
    let plan = SimPlan::new(&KernelSpec::ito_mbm(), 0.5, 0.5, &sim).unwrap();
    let w = cumulate(plan.draw(42, 0).noise());
    let w0 = w.value_at_or_before(0.0);
    for line in &lines[1..] {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((f[1] - (w.value_at_or_before(f[0]) - w0)).abs() < 1e-10);
        assert_eq!(f[2], 0.5);
    }
}

#[test]
fn seed_flag_overrides_and_multi_path_layout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"schema": 1, "seed": 1, "grid": {"t_max": 1, "n_cells": 32},
            "kernel": {"family": "matern", "lambda": 4},
            "hurst": {"kind": "step", "levels": [0.3, 0.7], "breakpoints": [0.5]},
            "sim": {"n_paths": 3, "substeps": 2}}"#,
    );
    let out = |name: &str| dir.path().join(name).to_str().unwrap().to_string();
    assert!(run(&["simulate", "--config", &cfg, "--out", &out("a.csv")]).status.success());
    assert!(run(&["simulate", "--config", &cfg, "--out", &out("b.csv"), "--seed", "2"]).status.success());
    let h = out("h.csv");
    assert!(run(&["simulate", "--config", &cfg, "--out", &out("c.csv"), "--seed", "1", "--hurst-out", &h]).status.success());
    let a = std::fs::read_to_string(out("a.csv")).unwrap();
    assert_ne!(a, std::fs::read_to_string(out("b.csv")).unwrap());
    assert_eq!(a, std::fs::read_to_string(out("c.csv")).unwrap());
    assert!(a.starts_with("t,value,H,path_id\n"));
    assert_eq!(a.lines().count(), 1 + 3 * 33);
    assert!(a.lines().nth(1 + 16).unwrap().ends_with(",0.7,0"));
    assert!(std::fs::read_to_string(h).unwrap().starts_with("t,H\n"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"schema": 1, "grid": {"n_cells": 8, "cells": 3}}"#);
    let o = run(&["simulate", "--config", &bad, "--out", dir.path().join("x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    let o = run(&["simulate", "--config", missing.to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let ok = write(dir.path(), "ok.json", r#"{"schema": 1, "grid": {"n_cells": 8}}"#);
    let o = run(&["simulate", "--config", &ok, "--out", dir.path().join("no/such/dir/x.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(env!("CARGO_BIN_EXE_multifrac"))
        .args(["covariance", "fbm", "--H", "0.5", "--t", "1", "--s", "1"])
        .env("MULTIFRAC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_kc_fails_for_an_overclaimed_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let over = write(
        dir.path(),
        "kc.json",
        r#"{"schema": 1, "grid": {"n_cells": 256}, "sim": {"substeps": 1},
            "analysis": {"kc": {"exponent": 0.8, "n_paths": 500}}}"#,
    );
    let out = dir.path().join("report");
    let o = run(&["verify", "kc", "--config", &over, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["verdict"], "unbounded_trend");
    assert!(out.join("kc.csv").exists());

    let honest = write(dir.path(), "ok.json", r#"{"schema": 1, "grid": {"n_cells": 256}, "sim": {"substeps": 1}}"#);
    assert_eq!(run(&["verify", "kc", "--config", &honest]).status.code(), Some(0));
}

#[test]
fn verify_rescale_and_holder_pass_for_constant_hurst() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "rescale", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let holder = write(
        dir.path(),
        "h.json",
        r#"{"schema": 1, "grid": {"n_cells": 16384}, "sim": {"substeps": 1, "n_paths": 10},
            "hurst": {"kind": "constant", "value": 0.7}}"#,
    );
    let o = run(&["verify", "holder", "--config", &holder]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn verify_fig2_reports_both_medians() {
    let o = run(&["verify", "fig2"]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let k = summary["median_alpha_ito_mbm"].as_f64().unwrap();
    let b = summary["median_alpha_mbm"].as_f64().unwrap();
    assert!(k > 0.78 && k < 1.0 && b > 0.1 && b < 0.35, "{k} {b}");
}

#[test]
fn reproduce_writes_figures_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    for (fig, files) in [
        ("fig1", vec!["matern_path.csv", "hurst_path.csv", "manifest.json"]),
        ("fig2", vec!["mbm_path.csv", "ito_mbm_path.csv", "hurst_path.csv", "manifest.json"]),
    ] {
        let a = dir.path().join(format!("{fig}_a"));
        let b = dir.path().join(format!("{fig}_b"));
        assert!(run(&["reproduce", fig, "--out", a.to_str().unwrap()]).status.success());
        assert!(run(&["reproduce", fig, "--out", b.to_str().unwrap()]).status.success());
        for f in &files {
            assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{fig}/{f}");
        }
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["figure"], fig);
        assert!(m["seed"].is_u64());
    }
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig1_a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["kernel"]["lambda"], 4.0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig2_a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["hurst"]["center"], 0.9);
    assert_eq!(m["hurst"]["amplitude"], 0.05);
    assert_eq!(m["hurst"]["driver_hurst"], 0.2);
    assert_eq!(m["sigma"], 1.0);
    let h = std::fs::read_to_string(dir.path().join("fig2_a/hurst_path.csv")).unwrap();
    assert!(h.lines().skip(1).all(|l| {
        let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        v > 0.85 && v < 0.95
    }));
}
