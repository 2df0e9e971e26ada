use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cdarp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdarp")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cdarp(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_params(dir: &Path) {
    fs::write(dir.join("params.json"), r#"{"t_max": 300.0, "gamma": 0.99}"#).unwrap();
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--group", "B", "--seed", "5", "--out", "a"]);
    ok(dir.path(), &["generate", "--group", "B", "--seed", "5", "--out", "b"]);
    let a = fs::read(dir.path().join("a/B-5.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/B-5.json")).unwrap());
}

#[test]
fn solve_reports_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_params(d);
    ok(d, &["generate", "--group", "A", "--seed", "2", "--out", "."]);
    let nc = ok(d, &["solve", "--instance", "A-2.json", "--mode", "nc", "--params", "params.json", "--out", "nc"]);
    assert!(nc.lines().skip(1).all(|l| l.contains("S=0 U=0")), "{nc}");
    let summary = ok(d, &[
        "solve", "--instance", "A-2.json", "--mode", "t", "--alpha-t", "0.3", "--params", "params.json", "--out", "t",
    ]);
    assert!(summary.starts_with("mode=T cost="));
    assert!(summary.contains("sav="));
    let check = ok(d, &["check", "--instance", "A-2.json", "--solution", "t/solution.json"]);
    assert!(check.starts_with("ok"));

    let path = d.join("t/solution.json");
    let text = fs::read_to_string(&path).unwrap();
    let cost = text.lines().find(|l| l.trim_start().starts_with("\"cost\"")).unwrap().to_string();
    fs::write(&path, text.replacen(&cost, "  \"cost\": 1,", 1)).unwrap();
    let out = cdarp(d, &["check", "--instance", "A-2.json", "--solution", "t/solution.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cdarp(d, &["solve", "--instance", "missing.json"]).status.code(), Some(3));
    fs::write(d.join("broken.json"), "{").unwrap();
    assert_eq!(cdarp(d, &["solve", "--instance", "broken.json"]).status.code(), Some(3));
    ok(d, &["generate", "--group", "A", "--seed", "0", "--out", "."]);
    assert_eq!(cdarp(d, &["solve", "--instance", "A-0.json", "--mode", "t"]).status.code(), Some(1));

    // a request nobody may serve
    let text = fs::read_to_string(d.join("A-0.json")).unwrap();
    let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
    value["requests"][0]["lock"] = serde_json::json!({"kind": "denylist", "companies": [0, 1]});
    fs::write(d.join("locked.json"), serde_json::to_string(&value).unwrap()).unwrap();
    let out = cdarp(d, &["solve", "--instance", "locked.json", "--mode", "uc", "--backend", "oracle"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn benchmark_and_multiday_outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_params(d);
    ok(d, &["generate", "--group", "A", "--seed", "10", "--count", "2", "--out", "inst"]);
    for run in ["r1", "r2"] {
        ok(d, &[
            "benchmark", "--instance", "inst", "--modes", "uc,t", "--alphas", "0.2", "--seeds", "1,2", "--params",
            "params.json", "--workers", "2", "--out", run,
        ]);
        ok(d, &[
            "multiday", "--instance", "inst/A-10.json", "inst/A-11.json", "--mode", "t", "--alpha-t", "0.1",
            "--params", "params.json", "--seed", "4", "--out", &format!("{run}/days"),
        ]);
    }
    for file in ["results.csv", "summary.csv", "operator_ranks.csv", "days/multiday.csv", "days/day_1.json", "days/day_2.json"] {
        let a = fs::read(d.join("r1").join(file)).unwrap();
        assert_eq!(a, fs::read(d.join("r2").join(file)).unwrap(), "{file}");
    }
    let results = fs::read_to_string(d.join("r1/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
    let ranks = fs::read_to_string(d.join("r1/operator_ranks.csv")).unwrap();
    assert!(ranks.lines().any(|l| l.ends_with(",VI")));
}

#[test]
fn lp_export_to_stdout_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--group", "A", "--seed", "3", "--out", "."]);
    let text = ok(d, &["export-lp", "--instance", "A-3.json", "--mode", "uc"]);
    assert!(text.starts_with("Minimize") && text.trim_end().ends_with("End"));
    ok(d, &["export-lp", "--instance", "A-3.json", "--mode", "uc", "--out", "m.lp"]);
    assert_eq!(fs::read_to_string(d.join("m.lp")).unwrap(), text);
    let out = cdarp(d, &["export-lp", "--instance", "A-3.json", "--variable-cap", "10"]);
    assert_eq!(out.status.code(), Some(1));
}
