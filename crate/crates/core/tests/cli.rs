use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_stellar-witness");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const ONE_WINDOW: &str = r#"[{"theta":0,"x":0,"eta":0.3}]"#;

#[test]
fn fock_two_zeros_sit_at_hermite_roots() {
    let v = json(&["zeros", "--state", "fock:2", "--theta", "0.3"]);
    let zeros: Vec<f64> = serde_json::from_value(v["sets"][0]["zeros"].clone()).unwrap();
    let r = 0.5f64.sqrt();
    assert_eq!(zeros.len(), 2);
    assert!((zeros[0] + r).abs() < 1e-12 && (zeros[1] - r).abs() < 1e-12);
}

#[test]
fn vacuum_has_no_zeros() {
    let v = json(&["zeros", "--state", "vacuum"]);
    assert_eq!(v["total_zeros"], 0);
}

#[test]
fn three_photon_target_zero_census() {
    let v = json(&["zeros", "--state", "psiT"]);
    assert_eq!(v["zero_bearing_angles"], 6);
    assert_eq!(v["total_zeros"], 8);
}

#[test]
fn threshold_is_deterministic_and_hashed() {
    let args = ["threshold", "--state", "psiT", "--energy", "1.2", "--eta", "0.83", "--format", "csv"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    let hash = lines.next().unwrap().strip_prefix("# config_hash=").unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(lines.next().unwrap(), "threshold,target_expectation,violation,argmin_energy");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[2] - 0.5276).abs() < 1e-3);
}

#[test]
fn threshold_without_target() {
    let v = json(&["threshold", "--energy", "1", "--windows", ONE_WINDOW, "--restarts", "8"]);
    let t = v["threshold"]["value"].as_f64().unwrap();
    assert!(t > 0.0 && t < 0.3);
    assert!(v.get("violation").is_none());
}

#[test]
fn exit_codes_follow_verdicts() {
    // A lossless single photon against a narrow window: the gap is far below epsilon.
    let inconclusive = run(&["certify", "--state", "fock:1", "--windows", ONE_WINDOW, "--samples", "2000", "--seed", "3"]);
    assert_eq!(inconclusive.status.code(), Some(2));
    let certified = run(&["certify", "--state", "psiT", "--energy", "1.2", "--eta", "0.83", "--restarts", "16", "--epsilon", "0.2"]);
    assert_eq!(certified.status.code(), Some(0), "{}", String::from_utf8_lossy(&certified.stderr));
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&["threshold", "--energy", "-1", "--windows", ONE_WINDOW]).status.code(), Some(1));
}

#[test]
fn batches_at_wrong_angle_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let out = run(&["sample", "--state", "fock:1", "--theta", "1.0", "--samples", "50", "--format", "csv", "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let certify = run(&["certify", "--windows", ONE_WINDOW, "--batches", path.to_str().unwrap()]);
    assert_eq!(certify.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&certify.stderr).contains("angle"));
}

#[test]
fn sample_csv_carries_provenance() {
    let out = run(&["sample", "--state", "fock:1", "--theta", "0", "--samples", "5", "--seed", "1", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# theta="));
    assert_eq!(lines[1], "# seed=1");
    assert!(lines[2].starts_with("# state_hash="));
    assert_eq!(lines[3], "q");
    assert_eq!(lines.len(), 9);
}

#[test]
fn loss_sweep_with_two_quadratures_crosses_zero() {
    let v = json(&["loss-sweep", "--theta", "0,1.5707963267948966", "--restarts", "8"]);
    let p = v["zero_crossing_p"].as_f64().unwrap();
    assert!(p > 0.0 && p < 1.0, "crossing at {p}");
    let violations: Vec<f64> = v["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|pt| pt["violation"].as_f64().unwrap())
        .collect();
    assert!(violations.first().unwrap() > &0.0 && violations.last().unwrap() < &0.0);
    assert!(violations.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, r#"{"state":"psiT","energy":1.2,"eta":0.83,"restarts":8}"#).unwrap();
    let file = json(&["threshold", "--config", path.to_str().unwrap()]);
    let overridden = json(&["threshold", "--config", path.to_str().unwrap(), "--eta", "0.3"]);
    assert_eq!(file["windows"][0]["eta"], 0.83);
    assert_eq!(overridden["windows"][0]["eta"], 0.3);
    std::fs::write(&path, r#"{"state":"psiT","colour":1}"#).unwrap();
    assert_eq!(run(&["threshold", "--config", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn sample_plan_matches_hoeffding_count() {
    let v = json(&["sample-plan", "--violation", "0.2"]);
    assert_eq!(v["plan"][0]["samples_per_window"], 600);
}

#[test]
fn oracle_energy_agrees() {
    let v = json(&["oracle", "--state", "psiT"]);
    let a = v["analytic_energy"].as_f64().unwrap();
    let o = v["oracle_energy"].as_f64().unwrap();
    assert!((a - o).abs() < 1e-8);
}
