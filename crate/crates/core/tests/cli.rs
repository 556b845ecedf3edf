use std::process::Command;

fn ggplab(cache: &std::path::Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ggplab"));
    c.env("GGPLAB_CACHE_DIR", cache);
    c
}

#[test]
fn verify_writes_report_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let st = ggplab(dir.path())
        .args(["verify", "--suite", "rtf.inequality", "--trials", "50", "--seed", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["version"], "1");
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["suites"].as_array().unwrap().len(), 1);
    assert_eq!(v["suites"][0]["status"], "pass");

    let bad = ggplab(dir.path()).args(["verify", "--suite", "all", "--p", "2"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("odd prime"));
    let unknown = ggplab(dir.path()).args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = ggplab(dir.path())
        .args(["verify", "--suite", "offdiag.norm-scan", "--p", "5", "--l", "2", "--samples", "5", "--threshold", "0.01"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["suites"][0]["status"], "fail");
    assert_eq!(v["suites"][0]["checks"][0]["threshold"], 0.01);
}

#[test]
fn config_file_then_flags_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "suite = exponents, hecke.amplifier\nn = 2\nseed = 1\n").unwrap();
    let out = ggplab(dir.path()).args(["verify", "--config"]).arg(&cfg).args(["--n", "1", "--format", "md"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let md = String::from_utf8(out.stdout).unwrap();
    assert!(md.contains("n = 1, p = 3"));
    assert!(md.contains("| exponents | pass |"));
    assert!(md.contains("| hecke.amplifier | pass |"));
}

#[test]
fn exponent_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ggplab(dir.path()).args(["exponents", "--n", "1..2", "--format", "md"]).output().unwrap();
    assert!(out.status.success());
    let s = String::from_utf8(out.stdout).unwrap();
    assert!(s.contains("| 1 | 1 | 0 | 1/16 | 1/64 | 15/64 | 8 | 1/2 | 1/8 |"), "{s}");
    assert!(s.contains("| 2 | 1 | 0 | 1/34 | 1/408 |"));
    let bad = ggplab(dir.path()).args(["exponents", "--theta", "1/2"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn cache_list_and_clear() {
    let dir = tempfile::tempdir().unwrap();
    let st = ggplab(dir.path()).args(["verify", "--suite", "mlift.uniqueness"]).output().unwrap();
    assert!(st.status.success());
    let list = String::from_utf8(ggplab(dir.path()).args(["cache", "list"]).output().unwrap().stdout).unwrap();
    assert!(list.contains("cosets/n2-p3-K-Tt1-L1"), "{list}");
    let clear = String::from_utf8(ggplab(dir.path()).args(["cache", "clear"]).output().unwrap().stdout).unwrap();
    assert!(clear.contains("removed 1"));
    let list = String::from_utf8(ggplab(dir.path()).args(["cache", "list"]).output().unwrap().stdout).unwrap();
    assert_eq!(list.lines().count(), 1);
}
