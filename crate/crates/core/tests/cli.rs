use std::process::{Command, Output};

fn jsprr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jsprr")).args(args).output().unwrap()
}

#[test]
fn generate_then_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    let inst = inst.to_str().unwrap();
    let out = jsprr(&["--seed", "3", "--scale", "0.1", "generate", "--out", inst]);
    assert!(out.status.success());
    let out = jsprr(&["--seed", "1", "solve", inst, "--trials", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn invalid_instance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"services":[{"id":0,"r":1,"c":1,"bu":1,"bd":1}],
            "stations":[{"id":0,"R":-1,"C":1,"Bu":1,"Bd":1}],
            "users":[{"id":0,"coverage":[5],"service":0}]}"#,
    )
    .unwrap();
    let out = jsprr(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(!msg.contains("parse"), "{msg}");
}

#[test]
fn bad_flags_exit_2() {
    assert_eq!(jsprr(&["experiment", "--sweep", "nonsense"]).status.code(), Some(2));
    assert_eq!(jsprr(&["periods", "x.json", "--churn", "1.5"]).status.code(), Some(2));
    assert_eq!(jsprr(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn analyze_counterexample() {
    let out = jsprr(&["--format", "json", "analyze", "--bottleneck", "compute"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["f_b_plus"], 2);
}

#[test]
fn report_summarizes_results() {
    let dir = tempfile::tempdir().unwrap();
    let res = dir.path().join("r.csv");
    let res = res.to_str().unwrap();
    let out = jsprr(&[
        "--scale", "0.1", "--out", res, "experiment", "--sweep", "storage", "--values", "250,500",
        "--n-seeds", "2", "--trials", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = jsprr(&["report", res]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("sweep,algo,runs,mean_cloud_load"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}
