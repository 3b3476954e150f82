use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multisos")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn dims_example() {
    let v = json(&["dims", "--shape", "N=3,2 K=2,3"]);
    assert_eq!(v["result"]["dim_P"], 24);
    assert_eq!(v["result"]["M"], 23);
    let total: u64 = v["result"]["dims_H"].as_object().unwrap().values().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(total, 24);
    assert_eq!(v["config"]["shape"], "N=3,2 K=2,3");
    assert_eq!(v["config"]["seed"], 0);
}

#[test]
fn t_det_example() {
    let v = json(&["t", "det", "--shape", "N=2 K=2"]);
    assert_eq!(v["result"]["det"], "1/4");
    let root = v["result"]["root"].as_f64().unwrap();
    assert!((root - 0.25f64.powf(1.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn floats_carry_17_significant_digits() {
    let out = run(&["t", "det", "--shape", "N=2 K=2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"root\": 6.2996052494743660e-1"), "{text}");
}

#[test]
fn gram_entries_are_exact_strings() {
    let v = json(&["gram", "--shape", "N=2 K=2"]);
    assert_eq!(v["result"]["entries"][0][0], "3/8");
    assert_eq!(v["result"]["entries"][1][1], "1/8");
    assert_eq!(v["result"]["basis"][1], "x1 x2");
}

#[test]
fn decompose_and_apply() {
    let v = json(&["decompose", "--shape", "N=2 K=2", "--poly", "x1^2"]);
    assert_eq!(v["result"]["components"]["0"], "1/2");
    assert_eq!(v["result"]["components"]["2"], "1/2 x1^2 - 1/2 x2^2");
    let v = json(&["t", "apply", "--shape", "N=2 K=2", "--poly", "x1^2 - x2^2"]);
    assert_eq!(v["result"]["image"], "1/2 x1^2 - 1/2 x2^2");
    assert_eq!(v["result"]["direct_agrees"], true);
}

#[test]
fn poly_file_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.txt");
    std::fs::write(&path, "x1^4 + 2 x1^2 x2^2 + x2^4\n").unwrap();
    let v = json(&["cone", "sos", "--shape", "N=2 K=4", "--poly-file", path.to_str().unwrap()]);
    assert_eq!(v["result"]["verdict"], "feasible");
    assert!(v["result"]["verification"]["witness_residual"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn motzkin_verdicts() {
    let motzkin = "x3^6 + x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 x3^2";
    let v = json(&["cone", "pos", "--shape", "N=3 K=6", "--poly", motzkin]);
    assert!(v["result"]["min"].as_f64().unwrap().abs() < 1e-9);
    let v = json(&["cone", "sos", "--shape", "N=3 K=6", "--poly", motzkin]);
    assert_eq!(v["result"]["verdict"], "infeasible");
    assert!(v["result"]["verification"]["certificate_pairing"].as_f64().unwrap() <= -1e-6);
}

#[test]
fn lin_kernel() {
    let v = json(&["cone", "lin", "--shape", "N=2 K=2", "--point", "3/5,4/5"]);
    assert_eq!(v["result"]["kernel"], "9/25 x1^2 + 24/25 x1 x2 + 16/25 x2^2");
    assert_eq!(v["result"]["t_identity_deviation"], "0");
}

#[test]
fn selftest_passes() {
    let v = json(&["selftest"]);
    assert_eq!(v["result"]["passed"], true);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = run(&["dims", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["dims"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["dims", "--shape", "N=2"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one() {
    assert_eq!(run(&["t", "det", "--shape", "N=2 K=3"]).status.code(), Some(1));
    assert_eq!(run(&["decompose", "--shape", "N=2 K=2", "--poly", "x1^3"]).status.code(), Some(1));
    assert_eq!(run(&["cone", "lin", "--shape", "N=2 K=2", "--point", "1,1"]).status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_for_fixed_seed_and_workers() {
    let args = ["volume", "pos", "--shape", "N=2,2 K=2,2", "--samples", "100", "--seed", "5", "--workers", "1"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let args = ["volume", "isotropy", "--shape", "N=2,2 K=2,2", "--samples", "500", "--seed", "5"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn dump_writes_per_sample_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.csv");
    let v = json(&["volume", "sq-width", "--shape", "N=2 K=4", "--samples", "40", "--dump", path.to_str().unwrap()]);
    assert_eq!(v["result"]["samples"], 40);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda_max,rayleigh_b1"));
    assert_eq!(lines.count(), 40);
}

#[test]
fn bounds_json_and_grid_csv() {
    let v = json(&["bounds", "--shape", "N=2,2 K=2,2", "--constants", "c1=2"]);
    let main = &v["result"]["reports"][0];
    assert_eq!(main["title"], "main");
    assert_eq!(main["constants"]["c1"], 2.0);
    let out = run(&["bounds", "grid", "--max-blocks", "1", "--max-n", "3", "--max-k", "2", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "report,shape,record,lower,upper,unresolved");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert_eq!(run(&["bounds", "--shape", "N=2 K=2", "--constants", "zeta=1"]).status.code(), Some(2));
}
