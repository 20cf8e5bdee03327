use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpdolbeault")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> Option<i32> {
    run(args).status.code()
}

fn read(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

#[test]
fn report_matches_golden_files() {
    let genus0 = ["report", "--genus", "0", "--degree", "1", "--dim", "2", "--q", "1"];
    assert_eq!(stdout(&genus0), read("genus0_d2_q1.md"));
    let genus1 = ["report", "--genus", "1", "--degree", "1", "--dim", "2", "--q", "1"];
    assert_eq!(stdout(&genus1), read("genus1_d2_q1.md"));
    for (format, file) in [("json", "genus1_d2_q1.json"), ("csv", "genus1_d2_q1.csv")] {
        let mut args = genus1.to_vec();
        args.extend(["--format", format]);
        assert_eq!(stdout(&args), read(file));
    }
}

#[test]
fn output_files_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let table = fixture("genus2_dimtable.json");
    let table = table.to_str().unwrap();
    let commands: [&[&str]; 3] = [
        &["report", "--dimtable", table, "--format", "json"],
        &["indices", "--p", "8/3", "--q", "2", "--dim", "3", "--format", "csv"],
        &["verify", "--suite", "rr"],
    ];
    for (i, args) in commands.iter().enumerate() {
        let mut bytes = Vec::new();
        for round in 0..2 {
            let path = dir.path().join(format!("{i}-{round}.out"));
            let mut args = args.to_vec();
            args.extend(["--out", path.to_str().unwrap()]);
            let out = run(&args);
            assert!(out.status.success(), "{args:?}");
            assert!(out.stdout.is_empty());
            bytes.push(std::fs::read(&path).unwrap());
        }
        assert!(!bytes[0].is_empty());
        assert_eq!(bytes[0], bytes[1], "{args:?}");
    }
}

#[test]
fn index_examples() {
    let v: Value = serde_json::from_str(&stdout(&["indices", "--p", "4/3", "--q", "1", "--dim", "2"])).unwrap();
    assert_eq!((v["a"].as_str(), v["c"].as_str()), (Some("-2"), Some("-1")));
    assert_eq!(v["breakpoints"], serde_json::json!(["1", "4/3", "2", "4"]));
    let v: Value = serde_json::from_str(&stdout(&["indices", "--p", "inf", "--q", "1", "--dim", "2"])).unwrap();
    assert_eq!((v["a"].as_str(), v["c"].as_str()), (Some("1"), Some("2")));
    let md = stdout(&["indices", "--p", "2", "--q", "1", "--dim", "2", "--format", "md"]);
    assert!(md.starts_with("| key | value |\n| --- | --- |\n| p | 2 |\n"));
}

#[test]
fn genus_two_needs_a_table() {
    assert_eq!(code(&["report", "--genus", "2"]), Some(2));
    let table = fixture("genus2_dimtable.json");
    let rows: Value = serde_json::from_str(&stdout(&["report", "--dimtable", table.to_str().unwrap(), "--format", "json"])).unwrap();
    let at_two = rows.as_array().unwrap().iter().find(|r| r["p"] == "2").unwrap();
    assert_eq!(at_two["lower"], 2);
}

#[test]
fn riemann_roch_table() {
    let csv = stdout(&["riemann-roch", "--genus", "1", "--degree", "2", "--from", "-2", "--to", "1", "--format", "csv"]);
    assert_eq!(csv, "mu,degree,h0,h1\n-2,-4,0,4\n-1,-2,0,2\n0,0,1,1\n1,2,2,0\n");
    assert_eq!(code(&["riemann-roch", "--from", "3", "--to", "1"]), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(&["indices", "--p", "0.5", "--q", "1", "--dim", "2"]), Some(2));
    assert_eq!(code(&["indices", "--p", "1/2", "--q", "1", "--dim", "2"]), Some(2));
    assert_eq!(code(&["indices", "--p", "2", "--q", "3", "--dim", "2"]), Some(2));
    assert_eq!(code(&["report", "--dim", "3", "--q", "3"]), Some(2));
    assert_eq!(code(&["solve", "/nonexistent/case.json"]), Some(2));
    assert_eq!(code(&["verify", "--suite", "everything"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
}

#[test]
fn verify_suite_reports_json() {
    let summary: Value = serde_json::from_str(&stdout(&["verify", "--suite", "indices"])).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["suite"], "indices");
    assert!(summary["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn solve_case_files() {
    let case = fixture("radial_case.json");
    let case = case.to_str().unwrap();
    let report: Value = serde_json::from_str(&stdout(&["solve", case])).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["levels"].as_array().unwrap().len(), 2);

    let csv = stdout(&["solve", case, "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1 + 2 * 3);

    let dir = tempfile::tempdir().unwrap();
    let mut strict: Value = serde_json::from_str(&read("radial_case.json")).unwrap();
    strict["tolerance"] = serde_json::json!(1e-9);
    let path = dir.path().join("strict.json");
    std::fs::write(&path, strict.to_string()).unwrap();
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);

    let fast: Value = serde_json::from_str(&stdout(&["solve", case, "--fast", "--seed", "5"])).unwrap();
    assert_eq!(fast["levels"][0]["n"], 64);
    assert_eq!(fast["tolerance"], 0.8);

    assert_eq!(code(&["solve", case, "--format", "md"]), Some(2));
}
