use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn odecert(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odecert")).args(args).current_dir(cwd).output().expect("spawn odecert")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn list_prints_the_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let o = odecert(&["list"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().count() >= 17);
    for name in ["fo-poly", "ho-osc-exp", "nc-log", "sys-jordan6"] {
        assert!(text.contains(name), "{name} missing");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(odecert(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(odecert(&["list", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(odecert(&["verify", "no-such-case", "--candidate", "exact"], dir.path()).status.code(), Some(2));
    assert_eq!(odecert(&["certify", "fo-poly", "--candidate", "missing.ckpt"], dir.path()).status.code(), Some(2));
    assert_eq!(odecert(&["certify", "fo-poly", "--candidate", "exact", "--p", "7"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("junk.ckpt"), b"not a snapshot").unwrap();
    assert_eq!(odecert(&["verify", "fo-poly", "--candidate", "junk.ckpt"], dir.path()).status.code(), Some(2));
}

#[test]
fn certify_writes_curves_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = odecert(&["certify", "ho-damp-trig", "--candidate", "exact", "--out", "out", "--grid", "16"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    for cells in [1, 10, 100] {
        assert!(out.join(format!("ho-damp-trig.bound_{cells}.csv")).is_file());
        assert!(out.join(format!("ho-damp-trig.profile_{cells}.csv")).is_file());
    }
    let csv = fs::read_to_string(out.join("ho-damp-trig.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,bound_1,bound_10,bound_100,abs_error"));
    assert_eq!(lines.count(), 1000);
    assert!(!csv.contains('\r'));
    let cert: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ho-damp-trig.certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["schema_version"], 1);
    assert_eq!(cert["verdict"], "CERTIFIED_AND_VERIFIED");
    assert!(cert["candidate_digest"].as_str().unwrap().len() == 64);
}

#[test]
fn train_then_certify_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = odecert(&["train", "fo-log", "--epochs", "3", "--seed", "4", "--out", "nets/fo.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("nets/fo.ckpt").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("nets/fo.ckpt.report.json")).unwrap()).unwrap();
    assert_eq!(report["report"]["loss_history"].as_array().unwrap().len(), 3);

    let args = ["--candidate", "nets/fo.ckpt", "--cells", "1,4", "--grid", "32"];
    let o = odecert(&[&["verify", "fo-log"][..], &args].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("CERTIFIED_AND_VERIFIED"));

    let o = odecert(&[&["certify", "fo-log", "--out", "c"][..], &args].concat(), dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("c/fo-log.bound_4.csv").is_file());

    // same bytes on a second training run
    odecert(&["train", "fo-log", "--epochs", "3", "--seed", "4", "--out", "again.ckpt"], dir.path());
    assert_eq!(fs::read(dir.path().join("nets/fo.ckpt")).unwrap(), fs::read(dir.path().join("again.ckpt")).unwrap());
}

const WRONG_START: &str = r#"
name = "fo-poly-shifted"
variant = "first_order"
solution = ["exp(-3t)", "t^2+t+1"]
u0 = [1.0]
[domain]
t0 = 0.0
t1 = 3.0
[[roots]]
lambda = 3.0
"#;

#[test]
fn wrong_initial_condition_is_a_violation() {
    // a network pinned to u(0) = 1 cannot meet the bound of a problem with u(0) = 2
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("shifted.toml"), WRONG_START).unwrap();
    let o = odecert(&["train", "shifted.toml", "--epochs", "2", "--out", "s.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = odecert(&["verify", "fo-poly", "--candidate", "s.ckpt", "--grid", "16"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("VIOLATION"));
}

const GROWTH: &str = r#"
name = "growth"
variant = "first_order"
solution = ["exp(t)"]
[domain]
t0 = 0.0
t1 = 2.0
[[roots]]
lambda = -1.0
"#;

const FORCED: &str = r#"
name = "forced"
variant = "nonconstant"
p = ["1/(1+t)"]
forcing = ["cos(t)"]
u0 = [1.0]
[domain]
t0 = 0.0
t1 = 2.0
"#;

#[test]
fn config_problems_and_relative_bounds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("growth.toml"), GROWTH).unwrap();
    let o = odecert(
        &["certify", "growth.toml", "--candidate", "exact", "--relative", "--out", "g", "--grid", "8"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rel = fs::read_to_string(dir.path().join("g/growth.relative.csv")).unwrap();
    assert!(rel.starts_with("t,bound,kind,theorem_tag,cells\n"));

    // forcing-only problems certify without verification
    fs::write(dir.path().join("forced.toml"), FORCED).unwrap();
    let o = odecert(&["train", "forced.toml", "--epochs", "2", "--out", "f.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let o = odecert(&["certify", "forced.toml", "--candidate", "f.ckpt", "--out", "f", "--grid", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("CERTIFIED_ONLY"));
    let o = odecert(&["verify", "forced.toml", "--candidate", "f.ckpt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn suite_subset_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = odecert(&["suite", "--epochs", "2", "--cases", "fo-exp,nc-recip", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("s/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().skip(1).all(|l| l.contains("CERTIFIED_AND_VERIFIED")));
    assert_eq!(odecert(&["suite", "--cases", "nope"], dir.path()).status.code(), Some(2));
}
