use std::process::{Command, Output};

use serde_json::Value;

fn hypstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypstat"))
        .args(args)
        .env_remove("HYPSTAT_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn growth_of_free_group() {
    let out = hypstat(&["growth", "--coding", "free:2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["command"], "growth");
    assert_eq!(v["result"]["lambda"].as_f64().unwrap(), 3.0);
    assert!((v["result"]["entropy"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-12);
    assert_eq!(v["meta"]["tool"], "hypstat");
}

#[test]
fn unknown_command_is_usage_error() {
    let out = hypstat(&["bogus"]);
    assert_eq!(code(&out), 2);
    assert!(out.stdout.is_empty());
}

#[test]
fn invalid_arguments_are_usage_errors() {
    assert_eq!(code(&hypstat(&["growth", "--coding", "free:2", "--horizon", "3"])), 2);
    assert_eq!(code(&hypstat(&["stats", "--coding", "free:2"])), 2);
    assert_eq!(code(&hypstat(&["stats", "--coding", "free:2", "--weights", "hom:a=x"])), 2);
    assert_eq!(code(&hypstat(&["ldt", "--coding", "free:2", "--weights", "wordlen", "--epsilon", "0"])), 2);
}

#[test]
fn refused_computation_exits_three() {
    let out = hypstat(&[
        "llt",
        "--coding",
        "free:2",
        "--weights",
        "hom:a=1,b=0",
        "--interval=-0.5,0.5",
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lattice"));
}

#[test]
fn failed_criterion_exits_one() {
    let out = hypstat(&["mclt", "--coding", "free:2", "--weights", "hom:a=1|1,b=1|1", "--ngrid", "20"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["result"]["passed"], false);
}

#[test]
fn clt_example_passes() {
    let out = hypstat(&["clt", "--coding", "free:2", "--weights", "hom:a=1,b=0"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    let rows = v["result"]["rows"].as_array().unwrap();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    assert_eq!(ns, [16, 36, 64, 100, 144, 196]);
}

#[test]
fn degeneracy_of_word_length() {
    let out = hypstat(&["degeneracy", "--coding", "free:2", "--weights", "wordlen", "--ncap", "40"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["predictions"]["spectral_degenerate"].as_f64().unwrap(), 1.0);
    assert_eq!(v["result"]["predictions"]["range_bounded"].as_f64().unwrap(), 1.0);
}

#[test]
fn csv_header() {
    let out = hypstat(&["averaging", "--coding", "free:2", "--weights", "hom:a=1,b=0", "--ngrid", "1..10", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,observed,predicted,residual"));
    assert_eq!(lines.count(), 10);
}

#[test]
fn output_is_byte_deterministic() {
    let args = ["ldt", "--coding", "free:2", "--weights", "hom:a=1,b=0", "--epsilon", "0.4", "--ngrid", "1..60"];
    let first = hypstat(&args);
    let again = hypstat(&args);
    assert_eq!(first.stdout, again.stdout);
    let single = Command::new(env!("CARGO_BIN_EXE_hypstat"))
        .args(args)
        .env("HYPSTAT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(first.stdout, single.stdout);
}

#[test]
fn json_round_trips() {
    let out = hypstat(&["dist", "--coding", "free:2", "--weights", "hom:a=1,b=0", "--n", "40"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    // #W_40 = 4·3^39 exceeds 2^53 and stays exact as a decimal string.
    assert_eq!(v["result"]["total"], "16210220612075905068");
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("growth.txt");
    let out = hypstat(&["growth", "--coding", "free:2", "--format", "text", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("lambda"));
}

#[test]
fn coding_file_validates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f2.json");
    let coding = hypstat_core::coding::build_free_group_coding(2).unwrap();
    std::fs::write(&path, serde_json::to_string(&coding.to_document()).unwrap()).unwrap();
    let out = hypstat(&["validate", "--coding", path.to_str().unwrap(), "--depth", "6"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json(&out)["result"]["passed"], true);
}

#[test]
fn missing_file_exits_three() {
    let out = hypstat(&["validate", "--coding", "/nonexistent/coding.json"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn ldt_reports_the_fitted_constant_overshoot() {
    // Integer tails jump at the first integer above nε; the constant fitted
    // at n = 10 (where that overshoot is a full unit) is exceeded at n = 11, 12.
    let out = hypstat(&["ldt", "--coding", "free:2", "--weights", "hom:a=1,b=0", "--epsilon", "0.4"]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    let failed: Vec<&str> = v["result"]["criteria"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["fitted-constant"]);
}
