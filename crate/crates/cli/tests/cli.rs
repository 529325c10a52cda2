use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn parapot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parapot")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, content).unwrap();
    p.to_str().unwrap().to_string()
}

const DIRAC: &str = r#"{"dim": 2, "atoms": [{"x": [0.0, 0.0], "t": 0.0, "mass": 1.0}]}"#;

#[test]
fn empty_campaign_exits_zero_with_an_empty_index() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"checks": []}"#);
    let out_dir = dir.path().join("out");
    let out = parapot(&["--out-dir", out_dir.to_str().unwrap(), "campaign", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let index: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("index.json")).unwrap()).unwrap();
    assert_eq!(index["total"], 0);
    assert_eq!(index["checks"].as_array().unwrap().len(), 0);
}

#[test]
fn malformed_measure_exits_two_naming_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"dim\": 2,\n \"atoms\": [{\"x\": [0.0, 0.0], \"t\": 0.0, \"mass\": }]}");
    let out = parapot(&["potential", "eval", "--kind", "riesz", "--alpha", "1", "--measure", &bad, "--random", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json") && err.contains("line 2"), "{err}");

    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"checks": [{"name": "w", "op": "weak_mapping", "spec": {"alpha": 1.0}, "measure": {"kind": "file", "path": "bad.json"}}]}"#,
    );
    let out = parapot(&["campaign", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn unknown_flags_and_bad_parameters_are_input_errors() {
    assert_eq!(parapot(&["campaign", "--nonsense"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", DIRAC);
    let out = parapot(&["potential", "eval", "--kind", "riesz", "--alpha", "9", "--measure", &m]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dirac_potential_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.json", DIRAC);
    let pts = write(dir.path(), "p.csv", "x1,x2,t\n1.0,0.0,0.0\n0.0,0.0,2.0\n");
    let out = parapot(&["potential", "eval", "--kind", "riesz", "--alpha", "1", "--measure", &m, "--points", &pts]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,t,value"));
    for (line, d) in lines.zip([1.0f64, 2.0]) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        let expect = 1.0 / (3.0 * d.powi(3));
        assert!((v - expect).abs() < 1e-9 * expect, "{v} vs {expect}");
    }
}

#[test]
fn fixed_seed_gives_identical_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"seed": 7, "checks": [
            {"name": "weak", "op": "weak_mapping", "spec": {"alpha": 1.0},
             "measure": {"kind": "random_atoms", "dim": 1, "count": 5, "half_width": 1.0, "t_min": -0.5, "t_max": 0.5}},
            {"name": "lower", "op": "heat_lower", "r": 1.0,
             "measure": {"kind": "random_atoms", "dim": 1, "count": 3, "half_width": 0.5, "t_min": 0.0, "t_max": 0.2},
             "grid": {"corner": [-1.0], "sides": [2.0], "t0": 0.0, "t1": 1.0, "cells": [16], "steps": 32}}
        ]}"#,
    );
    let run = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = parapot(&["--threads", "2", "--out-dir", out_dir.to_str().unwrap(), "campaign", "--config", &cfg]);
        assert!(out.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&out.stderr));
        ["index.json", "weak.json", "weak.csv", "lower.json", "lower.csv"].map(|f| fs::read(out_dir.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn heat_solve_and_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let problem = r#"{"mu": {"dim": 1, "atoms": []}, "sigma": {"dim": 1, "atoms": [{"x": [0.0], "t": 0.0, "mass": 1.0}]},
        "domain": "free_space",
        "grid": {"corner": [-1.0], "sides": [2.0], "t0": 0.0, "t1": 4.0, "cells": [5], "steps": 16}}"#;
    let sol = dir.path().join("u.csv");
    let out = parapot(&["heat", "solve", "--problem", problem, "--out", sol.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("r.json");
    let out = parapot(&["heat", "verify", "decay", "--solution", sol.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["pass"], true);
    assert!(r["conventions"].is_object());
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"checks": [{"name": "dirac", "op": "trace",
            "spec": {"kernel": "riesz_e", "alpha": 1.0, "p": 2.0, "tolerance": 0.05},
            "measure": {"kind": "dirac", "point": {"x": [0.0], "t": 0.0}},
            "sets": [{"center": {"x": [0.0], "t": 0.0}, "radius": 1.0}, {"center": {"x": [0.0], "t": 0.0}, "radius": 0.5},
                     {"center": {"x": [0.0], "t": 0.0}, "radius": 0.25}]}]}"#,
    );
    let out = parapot(&["campaign", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
