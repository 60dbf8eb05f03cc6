use std::process::Command;

use serde_json::Value;
use subproduct_cli::main_with_args;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_subproduct"))
}

fn run(args: &[&str]) -> (i32, String) {
    let mut full = vec!["subproduct"];
    full.extend_from_slice(args);
    let out = main_with_args(full);
    (out.code, out.stdout)
}

#[test]
fn k_theory_json_for_n3() {
    let out = bin()
        .args(["kk", "--n", "3", "--k-theory", "--json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["K0"]["rank"], 0);
    assert_eq!(v["K0"]["torsion"], serde_json::json!([2]));
    assert_eq!(v["K1"]["rank"], 0);
    assert_eq!(v["euler"], -2);
}

#[test]
fn usage_errors_exit_2() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["seq", "--n", "0"]).0, 2);
    assert_eq!(run(&["seq", "--n", "2", "--tol", "-1"]).0, 2);
    assert_eq!(run(&["verify", "--n", "2"]).0, 2);
    assert_eq!(
        run(&["verify", "--n", "2", "--max-degree", "3", "--threads", "0"]).0,
        2
    );
}

#[test]
fn failing_checks_exit_1() {
    // A tolerance below the attainable residuals makes numerical checks fail.
    let (code, text) = run(&[
        "fusion", "--n", "2", "--k", "1", "--m", "1", "--tol", "1e-30",
    ]);
    assert_eq!(code, 1, "{text}");
    assert!(text.contains("FAIL"));
}

#[test]
fn seq_json_is_stable() {
    let (code, a) = run(&["seq", "--n", "2", "--max", "8", "--json"]);
    assert_eq!(code, 0);
    let (_, b) = run(&["seq", "--n", "2", "--max", "8", "--json"]);
    assert_eq!(a, b);
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["result"]["d"][3], "21");
    assert_eq!(v["pass"], true);
    let names: Vec<&str> = v["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
}

#[test]
fn build_then_verify_matches_direct_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    let p = path.to_str().unwrap();
    assert_eq!(
        run(&["build", "--n", "1", "--max-degree", "5", "--out", p]).0,
        0
    );
    let (c1, loaded) = run(&["verify", "--in", p, "--all", "--json"]);
    let (c2, direct) = run(&["verify", "--n", "1", "--max-degree", "5", "--all", "--json"]);
    assert_eq!((c1, c2), (0, 0));
    let a: Value = serde_json::from_str(&loaded).unwrap();
    let b: Value = serde_json::from_str(&direct).unwrap();
    assert_eq!(a["reports"], b["reports"]);
}

#[test]
fn threads_do_not_change_reports() {
    let args = ["verify", "--n", "1", "--max-degree", "5", "--all", "--json"];
    let (_, a) = run(&args);
    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "3"]);
    let (_, b) = run(&threaded);
    let a: Value = serde_json::from_str(&a).unwrap();
    let b: Value = serde_json::from_str(&b).unwrap();
    assert_eq!(a["reports"], b["reports"]);
}

#[test]
fn timings_only_when_requested() {
    let (_, plain) = run(&["toeplitz", "--n", "1", "--max-degree", "4", "--json"]);
    assert!(!plain.contains("wall_ms"));
    let (_, timed) = run(&[
        "toeplitz",
        "--n",
        "1",
        "--max-degree",
        "4",
        "--json",
        "--timings",
    ]);
    assert!(timed.contains("wall_ms"));
}

#[test]
fn ideal_reports_correspondence() {
    let (code, text) = run(&["ideal", "--n", "1", "--max", "4", "--dims"]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("dims: [1, 2, 3, 4, 5]"));
    assert!(text.contains("ideal_fiber_distance"));
    let (code, text) = run(&[
        "ideal", "--n", "1", "--gens", "x0*x0", "--max", "3", "--dims",
    ]);
    assert_eq!(code, 0);
    assert!(text.contains("dims: [1, 2, 3, 5]"));
}

#[test]
fn rep_reducible_pattern() {
    for (pat, ok) in [("2", 0), ("1,1", 0), ("0,2", 0)] {
        assert_eq!(run(&["rep", "--n", "1", "--mults", pat]).0, ok);
    }
    let (code, text) = run(&["rep", "--n", "2", "--check"]);
    assert_eq!(code, 0);
    assert!(text.contains("rep_unitary"));
}

#[test]
fn kk_certify_small() {
    let (code, text) = run(&[
        "kk",
        "--n",
        "1",
        "--kmax",
        "2",
        "--mmax",
        "2",
        "--certify",
        "--k-theory",
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("K0 = Z"));
    assert!(text.contains("kk_theta_range"));
}
