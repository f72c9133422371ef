use std::path::Path;
use std::process::{Command, Output};

use bbcode::circuit::ScheduledCircuit;
use serde_json::Value;

fn bbcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bbcode")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    let out = bbcode(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SPEC_72: &str = r#"{"l":6,"m":6,"a_poly":"x3+y1+y2","b_poly":"y3+x1+x2"}"#;

#[test]
fn params_of_catalogued_codes() {
    let r = json(&["params", "108"]);
    assert_eq!((r["n"].as_u64(), r["k"].as_u64(), r["d_bp"].as_u64()), (Some(108), Some(8), Some(10)));
    assert_eq!(r["components"], 1);
    assert_eq!(r["thickness_valid"], true);
}

#[test]
fn params_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "c.json", SPEC_72);
    let r = json(&["params", &spec, "--trials", "20"]);
    assert_eq!((r["n"].as_u64(), r["k"].as_u64()), (Some(72), Some(12)));
    assert!(r["toric_layout"].is_object());
}

#[test]
fn large_code_distance_bound() {
    let r = json(&["params", "756"]);
    assert_eq!(r["k"], 16);
    assert_eq!(r["d_bp"], 34);
}

#[test]
fn bad_specs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let dup = write(dir.path(), "dup.json", r#"{"l":6,"m":6,"a_poly":"x3+x3+y2","b_poly":"y3+x1+x2"}"#);
    let out = bbcode(&["params", &dup]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
    let broken = write(dir.path(), "broken.json", "{\"l\":6,\n \"m\":}");
    let out = bbcode(&["params", &broken]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(bbcode(&["params", "no-such-code"]).status.code(), Some(2));
}

#[test]
fn circuit_verifies_and_counts_schedules() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = json(&["circuit", "144", "--verify", "--enumerate-schedules", "--out", out]);
    assert_eq!(r["verification"]["passed"], true);
    assert_eq!(r["depth7_schedules"], 936);
    let text = std::fs::read_to_string(dir.path().join("circuit.txt")).unwrap();
    assert!(text.starts_with("# manifest=circuit-manifest.json"));
    let parsed = ScheduledCircuit::from_text(&text).unwrap();
    assert_eq!(parsed.lm, 72);
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("circuit-manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "circuit");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn zero_cycles_is_a_usage_error() {
    assert_eq!(bbcode(&["circuit", "72", "--cycles", "0"]).status.code(), Some(2));
}

fn sweep(dir: &Path, p: &str) -> String {
    let cfg = format!(
        r#"{{"code":{SPEC_72},"p":{p},"n_cycles":1,"stop":{{"target_failures":2,"max_shots":192}},"seed":3}}"#
    );
    write(dir, "sweep.json", &cfg)
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

#[test]
fn simulate_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep(dir.path(), "[0.001,0.002]");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path, threads: &str| {
        let o = bbcode(&["simulate", &cfg, "--out", out.to_str().unwrap(), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o
    };
    run(&a, "1");
    run(&b, "2");
    let rows = data_rows(&a.join("results.csv"));
    assert_eq!(rows[0], "code,n,k,p,N_c,shots,failures,p_L,stderr,seed");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows, data_rows(&b.join("results.csv")));
    let again = run(&a, "1");
    assert!(String::from_utf8_lossy(&again.stderr).contains("resumed"));
    assert_eq!(rows, data_rows(&a.join("results.csv")));
    assert!(a.join("simulate-manifest.json").exists());
}

#[test]
fn empty_sweep_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep(dir.path(), "[]");
    let out = bbcode(&["simulate", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fit_recovers_exact_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let (c0, c1, c2, d) = (11.0f64, 300.0f64, -15000.0f64, 6);
    let mut csv = String::from("p,p_L\n");
    for p in [0.001f64, 0.002, 0.003, 0.004, 0.005, 0.006] {
        let pl = p.powf(d as f64 / 2.0) * (c0 + c1 * p + c2 * p * p).exp();
        csv += &format!("{p},{pl}\n");
    }
    let path = write(dir.path(), "pts.csv", &csv);
    let r = json(&["fit", &path, "--d", "6"]);
    let close = |k: &str, v: f64| assert!((r["fit"][k].as_f64().unwrap() - v).abs() < 1e-6 * v.abs(), "{k}");
    close("c0", c0);
    close("c1", c1);
    close("c2", c2);
}

#[test]
fn threshold_of_published_fit() {
    let r = json(&["threshold", "--published", "144", "--at", "0.001"]);
    let p0 = r["pseudo_threshold"].as_f64().unwrap();
    assert!((p0 / 0.0065 - 1.0).abs() < 0.1, "{p0}");
    let pl = r["evaluations"][0][1].as_f64().unwrap();
    assert!((pl / 2e-7 - 1.0).abs() < 0.3, "{pl}");
    assert_eq!(bbcode(&["threshold"]).status.code(), Some(2));
}

#[test]
fn logical_report_for_gross_code() {
    let r = json(&["logical", "144"]);
    assert_eq!(r["verified"], true);
    assert_eq!(r["total_added_qubits"], 1380);
    assert_eq!(r["swap_plan"]["chain_length"], 6);
    assert_eq!(r["swap_plan"]["cnot_depth"], 132);
    for a in r["ancillas"].as_array().unwrap() {
        assert_eq!(a["qubits_per_layer"], 30);
    }
}

#[test]
fn search_ranks_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", r#"{"l_range":[6,6],"m_range":[6,6],"k_min":8,"trials":5}"#);
    let r = json(&["search", &cfg, "--top", "3"]);
    let rows = r.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["k"], 12);
    assert_eq!(rows[0]["d_bp"], 6);
    let out = bbcode(&["search", &cfg, "--budget", "1"]);
    assert_eq!(out.status.code(), Some(1));
}
