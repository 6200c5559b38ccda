use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn robcool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robcool")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const RESONANCE: &str = "# Raman-free resonance point\neta_a = 0.05\neta_b = 0.2\nomega_a = 0.3\nomega_b = 0.5\n";

#[test]
fn rates_at_resonance_have_no_heating() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "resonance.cfg", RESONANCE);
    let json = stdout_json(&robcool(&["rates", "--config", &cfg]));
    assert_eq!(json["rates"]["a_plus"].as_f64().unwrap(), 0.0);
    assert!(json["rates"]["a_minus"].as_f64().unwrap() > 0.0);
    assert!(json["provenance"]["resolved_config"].as_str().unwrap().contains("omega_b = 0.5"));
}

#[test]
fn missing_config_exits_with_config_error() {
    let out = robcool(&["rates", "--config", "/nonexistent/robcool.cfg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_exits_with_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "eta_a = 0.05\nomega_c = 1\n");
    let out = robcool(&["steady", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("omega_c"));
}

#[test]
fn validity_gate_exits_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "gate.cfg", "eta_a = 0.2\neta_b = 0.8\nomega_a = 0.1\ncutoff = 4\n");
    assert_eq!(robcool(&["rates", "--config", &cfg]).status.code(), Some(4));
    let forced = robcool(&["rates", "--config", &cfg, "--force"]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn numerical_failure_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dark.cfg", "omega_a = 0\neta_a = 0\neta_b = 0\ncutoff = 3\n");
    let out = robcool(&["steady", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scan_of_101_points_emits_101_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scan.cfg",
        &format!("{RESONANCE}quantity = a_plus\naxis1 = omega_b\naxis1_mode = resonance_offset\naxis1_min = -0.1\naxis1_max = 0.1\naxis1_points = 101\n"),
    );
    let out_path = dir.path().join("scan.csv");
    let out = robcool(&["scan", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "d_omega_b_res,a_plus,status");
    assert_eq!(rows.len(), 102);
    assert!(rows[51].starts_with("0,") && rows[51].ends_with(",ok"), "{}", rows[51]);
    assert!(csv.contains("# axis1 = omega_b"));
}

#[test]
fn scan_output_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "scan.cfg",
        &format!("{RESONANCE}cutoff = 6\nquantity = n_ss_numeric\naxis1 = eta_ratio\naxis1_values = 3, 4, 5\naxis2 = omega_a\naxis2_min = 0.2\naxis2_max = 0.4\naxis2_points = 3\n"),
    );
    let data = |threads: &str| {
        let out = robcool(&["scan", "--config", &cfg, "--threads", threads]);
        assert!(out.status.success());
        String::from_utf8(out.stdout).unwrap().lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    let one = data("1");
    assert_eq!(one.lines().count(), 10);
    assert_eq!(one, data("4"));
}

#[test]
fn evolve_and_mc_write_time_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.cfg", &format!("{RESONANCE}cutoff = 4\n"));
    let evolve = robcool(&["evolve", "--config", &cfg, "--t-final", "5", "--samples", "6"]);
    assert!(evolve.status.success());
    let text = String::from_utf8(evolve.stdout).unwrap();
    assert!(text.contains("# t_final = 5.0"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);

    let args = ["mc", "--config", &cfg, "--n-traj", "8", "--t-final", "5", "--samples", "3", "--seed", "7"];
    let a = robcool(&args);
    let b = robcool(&args);
    assert!(a.status.success());
    let strip = |o: &Output| {
        String::from_utf8_lossy(&o.stdout).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&a), strip(&b));
    assert!(String::from_utf8_lossy(&a.stdout).contains("# seed = 7"));
}

#[test]
fn steady_reports_a_dark_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "resonance.cfg", &format!("{RESONANCE}cutoff = 8\n"));
    let json = stdout_json(&robcool(&["steady", "--config", &cfg]));
    assert!(json["pop_e"].as_f64().unwrap() < 1e-4);
    assert!(json["dark_state_fidelity"].as_f64().unwrap() > 0.99);
}

#[test]
fn derive_maps_realizations() {
    let geometry = stdout_json(&robcool(&["derive", "geometry", "--angle", "60"]));
    assert!((geometry["eta_ratio"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    let gradient = stdout_json(&robcool(&["derive", "gradient", "--lambda", "0.3", "--omega-d", "0.5", "--nu", "2"]));
    assert_eq!(gradient["eta_b"].as_f64().unwrap(), 0.15);
    let raman = robcool(&["derive", "raman", "--omega-p", "1", "--eta-p", "0.1", "--delta", "1"]);
    assert_eq!(raman.status.code(), Some(3));
    assert_eq!(robcool(&["derive", "geometry", "--angle", "95"]).status.code(), Some(2));
}

#[test]
fn operating_point_report_includes_the_gamma_sweep() {
    let json = stdout_json(&robcool(&["rates", "--scenario", "colinear60"]));
    assert!(json["report"]["rates"]["a_plus"].as_f64().unwrap().abs() < 1e-15);
    let csv = robcool(&["rates", "--scenario", "window45_rate", "--format", "csv"]);
    assert!(csv.status.success());
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("n_ss_numeric_gamma_")).count(), 6);
    assert_eq!(robcool(&["rates", "--scenario", "window99"]).status.code(), Some(2));
}
