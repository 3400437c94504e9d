use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn algebroid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_algebroid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn code(args: &[&str]) -> i32 {
    algebroid(args).status.code().unwrap()
}

#[test]
fn passing_and_failing_checks() {
    let so3 = corpus("so3.json");
    assert_eq!(code(&["check-algebroid", so3.to_str().unwrap()]), 0);
    let bad = corpus("perturbed_so3.json");
    let out = algebroid(&["check-algebroid", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FAIL axioms[perturbed so3]"), "{stderr}");
    assert!(stderr.contains("(1,2,3)"), "{stderr}");
}

#[test]
fn poisson_checks() {
    let lp = corpus("lie_poisson.json");
    assert_eq!(code(&["check-poisson", lp.to_str().unwrap()]), 0);
    let nj = corpus("nonjacobi.json");
    let out = algebroid(&["check-poisson", nj.to_str().unwrap(), "--json", "-"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert_eq!(v["checks"][0]["witness"], "(1,2,3): 1");
}

#[test]
fn wrong_version_is_bad_input() {
    let p = scratch("v2.json", r#"{"version": 2, "algebroids": []}"#);
    let out = algebroid(&["check-algebroid", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
    let p = scratch("noversion.json", r#"{"algebroids": []}"#);
    assert_eq!(code(&["check-algebroid", p.to_str().unwrap()]), 2);
}

#[test]
fn unknown_field_is_bad_input() {
    let p = scratch(
        "unknown.json",
        r#"{"version": 1, "name": "x", "base_coords": ["X1"], "poisson": [["0"]], "colour": 3}"#,
    );
    assert_eq!(code(&["check-poisson", p.to_str().unwrap()]), 2);
}

#[test]
fn parse_error_is_bad_input() {
    let p = scratch(
        "parse.json",
        r#"{"version": 1, "base_coords": ["X1", "X2"], "poisson": [["0", "X1 +"], ["-X1", "0"]]}"#,
    );
    let out = algebroid(&["check-poisson", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let p = scratch(
        "undeclared.json",
        r#"{"version": 1, "base_coords": ["X1", "X2"], "poisson": [["0", "Q"], ["-Q", "0"]]}"#,
    );
    assert_eq!(code(&["check-poisson", p.to_str().unwrap()]), 2);
}

#[test]
fn missing_file_and_bad_flags() {
    assert_eq!(code(&["check-algebroid", "/nonexistent/file.json"]), 2);
    assert_eq!(code(&["check-algebroid"]), 2);
    assert_eq!(code(&["no-such-command"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn json_report_shape() {
    let so3 = corpus("so3.json");
    let out = algebroid(&["check-algebroid", so3.to_str().unwrap(), "--json", "-", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "check-algebroid");
    assert_eq!(v["seed"], 3);
    assert!(v.get("timing_ms").is_none());
    let out = algebroid(&["check-algebroid", so3.to_str().unwrap(), "--json", "-", "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["timing_ms"].is_number());
}

#[test]
fn flow_writes_csv_and_state() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let csv = dir.join("flow.csv");
    let state = dir.join("flow_state.json");
    let f = corpus("flow_action.json");
    let out = algebroid(&[
        "flow",
        f.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--state",
        state.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,supF_base,supF_frame,action"));
    assert_eq!(lines.count(), 101);
    let s: serde_json::Value = serde_json::from_str(&fs::read_to_string(&state).unwrap()).unwrap();
    assert_eq!(s["N"], 32);
    assert_eq!(s["X"].as_array().unwrap().len(), 2);
}
