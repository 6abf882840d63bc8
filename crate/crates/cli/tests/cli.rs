use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str], config: &str, dir: &Path) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rabidimer"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn renorm_without_a2_term_is_identity() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["renorm"], r#"{"model": {"g": 0.4, "J": 0.02}}"#, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["omega0"], 1.0);
    assert_eq!(doc["g"], 0.4);
    assert_eq!(doc["J"], 0.02);
    assert_eq!(doc["r"], 0.0);
    assert!(tmp.path().join("out/renorm.json").exists());
    assert!(tmp.path().join("out/renorm.dat").exists());
}

#[test]
fn renorm_squeezes_parameters() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["renorm"], r#"{"model": {"g": 0.5, "J": 0.01, "D": 0.75}}"#, tmp.path());
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = doc["r"].as_f64().unwrap();
    assert!((r - 0.25 * 4f64.ln()).abs() < 1e-14);
    assert!((doc["omega0"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(doc["g"].as_f64().unwrap() < 0.5);
}

#[test]
fn malformed_configs_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    for bad in [
        r#"{"model": {"g": 0.2, "bogus": 1}}"#,
        r#"{"model": {"g": 0.2}"#,
        r#"{"model": {"g": -1.0}}"#,
        r#"{"model": {"sites": 3}}"#,
    ] {
        let out = run(&["evolve"], bad, tmp.path());
        assert_eq!(out.status.code(), Some(2), "config {bad}");
        assert!(!out.stderr.is_empty());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_rabidimer"))
        .args(["evolve", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trajectories_require_damping() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["trajectories"], r#"{"model": {"g": 0.2, "J": 0.01}}"#, tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

const SMALL_EVOLVE: &str = r#"{
    "model": {"g": 0.2, "J": 0.05, "n_max": 8},
    "initial_state": {"sites": [{"fock": 4}, {"fock": 0}]},
    "evolution": {"t_final": 20.0, "dt_sample": 0.5}
}"#;

#[test]
fn evolve_writes_traces_and_summary() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["evolve"], SMALL_EVOLVE, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let traces = rabi_dimer::propagate::read_csv(&dir.join("traces.csv")).unwrap();
    let labels: Vec<&str> = traces.iter().map(|s| s.label.as_str()).collect();
    for want in ["N_L", "N_R", "z"] {
        assert!(labels.contains(&want), "{labels:?}");
    }
    assert_eq!(traces[0].len(), 41);
    assert!(dir.join("traces.dat").exists());
    let summary = read_json(&dir.join("summary.json"));
    assert!(summary.to_string().contains("z_avg"));

    let resolved = std::fs::read_to_string(dir.join("resolved_config.json")).unwrap();
    let again = TempDir::new().unwrap();
    let rerun = run(&["evolve"], &resolved, again.path());
    assert!(rerun.status.success(), "{}", String::from_utf8_lossy(&rerun.stderr));
    assert_eq!(
        std::fs::read(again.path().join("out/traces.csv")).unwrap(),
        std::fs::read(dir.join("traces.csv")).unwrap()
    );
}

#[test]
fn output_formats_are_respected() {
    let tmp = TempDir::new().unwrap();
    let config = SMALL_EVOLVE.replace(
        r#""evolution""#,
        r#""output": {"formats": ["json"]}, "evolution""#,
    );
    let out = run(&["evolve"], &config, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    assert!(dir.join("summary.json").exists());
    assert!(!dir.join("traces.csv").exists());
    assert!(!dir.join("traces.dat").exists());
}

#[test]
fn sweep_writes_grid_and_resumes() {
    let tmp = TempDir::new().unwrap();
    let config = r#"{
        "model": {},
        "sweep": {
            "grid": {"g": {"min": 0.05, "max": 0.5, "points": 2}, "J": {"min": 0.01, "max": 0.1, "points": 2},
                     "n_i": 4, "T": 40.0},
            "skip_truncation_check": true
        },
        "evolution": {"t_final": 40.0}
    }"#;
    let first = run(&["sweep", "--workers", "2"], config, tmp.path());
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let dir = tmp.path().join("out");
    let grid = read_json(&dir.join("phase_grid.json"));
    let before = std::fs::read_to_string(dir.join("phase_grid.csv")).unwrap();
    assert!(dir.join("phase_points.dat").exists());
    assert!(dir.join("sweep_checkpoint.jsonl").exists());
    assert!(grid.to_string().contains("J_c"));

    let second = run(&["sweep", "--workers", "1"], config, tmp.path());
    assert!(second.status.success());
    assert_eq!(before, std::fs::read_to_string(dir.join("phase_grid.csv")).unwrap());
}

#[test]
fn spectrum_writes_scan() {
    let tmp = TempDir::new().unwrap();
    let config = r#"{
        "model": {"sites": 1},
        "spectrum": {"g": {"min": 0.5, "max": 1.5, "points": 3, "scale": "linear"},
                     "zeta_levels": 20, "chi_levels": 5, "fit_range": [0.5, 1.5]}
    }"#;
    let out = run(&["spectrum"], config, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("out");
    let doc = read_json(&dir.join("spectrum.json"));
    assert!(doc.to_string().contains("chi_fit"));
    let csv = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn trajectories_are_seed_reproducible() {
    let tmp = TempDir::new().unwrap();
    let config = r#"{
        "model": {"sites": 1, "g": 0.2, "n_max": 12},
        "initial_state": {"sites": [{"fock": 5}]},
        "evolution": {"t_final": 10.0},
        "damping": {"tau_gamma": 20.0, "n_traj": 8}
    }"#;
    let a = run(&["trajectories", "--seed", "11", "--workers", "1"], config, tmp.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let first = std::fs::read(tmp.path().join("out/ensemble.csv")).unwrap();
    let b = run(&["trajectories", "--seed", "11", "--workers", "2"], config, tmp.path());
    assert!(b.status.success());
    assert_eq!(first, std::fs::read(tmp.path().join("out/ensemble.csv")).unwrap());
    let summary = read_json(&tmp.path().join("out/summary.json"));
    assert_eq!(summary["master_seed"], 11);
}

#[test]
fn version_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_rabidimer")).arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("rabidimer"));
}
