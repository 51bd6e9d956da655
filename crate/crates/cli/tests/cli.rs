use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hamloop(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hamloop")).current_dir(dir).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    std::fs::write(dir.join(name), body).unwrap();
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

const HALF_IDENTITY: &str = "[coefficient]\nn = 1\nconstant = [[0.5, 0.0], [0.0, 0.5]]\n";
const SOFT_POWER: &str = "[model]\ntype = \"soft_power\"\nbeta = 1.75\n\n[options]\nT = 6.0\n";

#[test]
fn index_of_half_identity() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", HALF_IDENTITY);
    let out = hamloop(dir.path(), &["index", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], "1");
    assert_eq!(v["command"], "index");
    assert_eq!(v["results"]["i"], 1);
    assert_eq!(v["results"]["nu"], 0);
    assert_eq!(v["config_echo"]["coefficient"]["n"], 1);
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", HALF_IDENTITY);
    let a = hamloop(dir.path(), &["iterate", "--config", "c.toml", "--mmax", "3"]);
    let b = hamloop(dir.path(), &["iterate", "--config", "c.toml", "--mmax", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["results"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn hypotheses_certified_for_soft_power() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", SOFT_POWER);
    let out = hamloop(dir.path(), &["hypotheses", "--config", "m.toml"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["results"]["all_certified"], true);
}

#[test]
fn solve_then_minimal_period_from_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", SOFT_POWER);
    let out = hamloop(dir.path(), &["solve", "--config", "m.toml", "--out", "rec.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rec.json")).unwrap()).unwrap();
    assert_eq!(rec["results"]["certificates"]["index_interval"], true);
    assert!(rec["results"]["action"].as_f64().unwrap() > 0.0);
    let mp = hamloop(dir.path(), &["minimal-period", "--record", "rec.json"]);
    assert_eq!(mp.status.code(), Some(0));
    assert_eq!(json(&mp)["results"]["minimal_period"].as_f64(), Some(6.0));
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", &format!("{HALF_IDENTITY}\n[options]\nT = 3.0\n"));
    let out = hamloop(dir.path(), &["index", "--config", "c.toml", "--T", "6.283185307179586"]);
    let v = json(&out);
    assert_eq!(v["config_echo"]["options"]["T"].as_f64(), Some(2.0 * std::f64::consts::PI));
    assert_eq!(v["results"]["i"], 1);
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.toml", "[model]\ntype = \"soft_power\"\nbeta = 1.75\nwat = 1\n");
    write(dir.path(), "m.toml", SOFT_POWER);
    for args in [
        vec!["index", "--config", "missing.toml"],
        vec!["solve", "--config", "bad.toml"],
        vec!["index", "--config", "m.toml"],
        vec!["solve", "--config", "m.toml", "--format", "csv"],
        vec!["solve", "--config", "m.toml", "--tol", "0"],
    ] {
        let out = hamloop(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn not_found_exits_three_with_payload() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "q.toml", "[model]\ntype = \"quadratic\"\nb = 1.0\n\n[options]\nT = 4.4\nm = 8\n");
    let out = hamloop(dir.path(), &["solve", "--config", "q.toml"]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["results"]["diagnostic"]["kind"], "not-found");
}

#[test]
fn csv_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.toml", HALF_IDENTITY);
    let out = hamloop(dir.path(), &["index", "--config", "c.toml", "--format", "csv", "--m", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("position,eigenvalue"));
    // Accepted at the second level, 16: 2 (2 * 16 + 1) eigenvalues.
    assert_eq!(lines.count(), 66);
}

#[test]
fn linking_requires_explicit_varrho() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "m.toml", SOFT_POWER);
    let out = hamloop(dir.path(), &["linking", "--config", "m.toml", "--T", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = hamloop(dir.path(), &["linking", "--config", "m.toml", "--T", "10", "--varrho", "10", "--theta", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["results"]["gap_holds"], true);
    assert_eq!(v["results"]["m"], 16);
}
