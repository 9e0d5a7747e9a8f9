use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dripcs::numerics::{read_matrix_csv, read_vector_csv};

fn dripcs(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dripcs"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dripcs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn frame_gen_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dripcs(dir.path(), &["--seed", "3", "frame", "gen", "--kind", "random-tight", "--p", "3", "--d", "5", "--out", "D.csv"]);
    assert!(out.status.success());
    let m = read_matrix_csv(fs::File::open(dir.path().join("D.csv")).unwrap()).unwrap();
    assert_eq!(m.shape(), (3, 5));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("D.json")).unwrap()).unwrap();
    assert_eq!(meta, serde_json::json!({"label": "random_tight", "p": 3, "d": 5}));
}

#[test]
fn measure_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(dripcs(p, &["frame", "gen", "--kind", "identity", "--p", "6", "--out", "D.csv"]).status.success());
    assert!(dripcs(p, &["--seed", "5", "measure", "--n", "5", "--p", "6", "--phi-out", "phi.csv"]).status.success());
    fs::write(p.join("beta.csv"), "6,1\n0\n0\n1.5\n0\n0\n0\n").unwrap();
    let inst = json(&dripcs(p, &["measure", "--phi", "phi.csv", "--beta", "beta.csv", "--y-out", "y.csv"]));
    assert!(inst["y"].as_str().unwrap().starts_with("5,1\n"));
    assert_eq!(read_vector_csv(fs::File::open(p.join("y.csv")).unwrap()).unwrap().len(), 5);

    let res = json(&dripcs(p, &["recover", "--phi", "phi.csv", "--frame", "D.csv", "--y", "y.csv"]));
    assert_eq!(res["converged"], true);
    let gamma: Vec<f64> = serde_json::from_value(res["gamma_hat"].clone()).unwrap();
    assert_eq!(gamma.len(), 6);
    assert!((gamma[2] - 1.5).abs() < 1e-6, "{gamma:?}");
}

#[test]
fn drip_certify_exact_and_budget_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert!(dripcs(p, &["frame", "gen", "--kind", "mercedes-benz", "--out", "D.csv"]).status.success());
    fs::write(p.join("phi.csv"), "2,2\n2,0\n0,1\n").unwrap();
    let cert = json(&dripcs(p, &["drip", "certify", "--phi", "phi.csv", "--frame", "D.csv", "--k", "2"]));
    assert_eq!(cert["method"], "exact");
    assert!((cert["delta"].as_f64().unwrap() - 3.0).abs() < 1e-12);

    let mc = json(&dripcs(p, &["drip", "certify", "--phi", "phi.csv", "--frame", "D.csv", "--k", "1", "--method", "mc", "--samples", "50"]));
    assert_eq!(mc["method"], "lower_bound");
    assert_eq!(mc["samples"], 50);

    let refused = dripcs(p, &["drip", "certify", "--phi", "phi.csv", "--frame", "D.csv", "--k", "2", "--budget", "2"]);
    assert_eq!(refused.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("C(3, 2) = 3"));
}

#[test]
fn non_tight_frame_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("D.csv"), "2,2\n2,0\n0,1\n").unwrap();
    fs::write(p.join("phi.csv"), "2,2\n1,0\n0,1\n").unwrap();
    let out = dripcs(p, &["drip", "certify", "--phi", "phi.csv", "--frame", "D.csv", "--k", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn decompose_prints_atoms() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("v.csv"), "1,4\n0.4,-0.3,0.2,0.1\n").unwrap();
    let dec = json(&dripcs(dir.path(), &["decompose", "--v", "v.csv", "--k", "2", "--cap", "1"]));
    assert_eq!(dec["k"], 2);
    let w: Vec<f64> = serde_json::from_value(dec["weights"].clone()).unwrap();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);

    let bad = dripcs(dir.path(), &["decompose", "--v", "v.csv", "--k", "2", "--cap", "0.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn experiment_json_lines_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = dripcs(p, &["experiment", "--trials", "3", "--phi-kind", "orthonormal", "--csv", "s.csv", "--out", "r.jsonl"]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = fs::read_to_string(p.join("r.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|r| r["status"] == "checked" && r["theorem"]["holds"] == true));
    assert!(lines.iter().all(|r| r.get("wall_time_ms").is_none()));
    let csv = fs::read_to_string(p.join("s.csv")).unwrap();
    assert!(csv.starts_with("seed,delta2k,eps,tail,lhs,rhs,margin,holds\n"));
    assert_eq!(csv.lines().count(), 4);

    let csv_out = dripcs(p, &["--format", "csv", "experiment", "--trials", "3", "--phi-kind", "orthonormal"]);
    assert_eq!(String::from_utf8(csv_out.stdout).unwrap(), csv);
}

#[test]
fn experiment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(dripcs(dir.path(), &["experiment", "--k", "5"]).status.code(), Some(2));
    assert_eq!(dripcs(dir.path(), &["experiment", "--eps", "-1"]).status.code(), Some(2));
    assert_eq!(dripcs(dir.path(), &["experiment", "--budget", "3"]).status.code(), Some(3));
    assert_eq!(dripcs(dir.path(), &["experiment", "--bogus"]).status.code(), Some(2));
}

#[test]
fn selftest_and_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dripcs(dir.path(), &["--format", "csv", "selftest"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");

    let bad = dripcs(dir.path(), &["selftest", "--inject-fault"]);
    assert_eq!(bad.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert!(report["checks"].as_array().unwrap().iter().any(|c| c["passed"] == false));
}
