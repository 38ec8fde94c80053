//! Drives the command-line binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchplan")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_the_catalog() {
    let o = bin(&["tasks"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().any(|l| l.starts_with("star") && l.contains("10000")));
    assert!(text.lines().any(|l| l.starts_with("unstack") && l.contains("1000")));
}

#[test]
fn run_resume_table_and_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bin(&["run", "--task", "star,unstack", "--approach", "proc3s,cap", "--seeds", "0-1", "--out", out, "--workers", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("| proc3s"));
    let records = std::fs::read_to_string(dir.path().join("records.ndjson")).unwrap();
    assert_eq!(records.lines().count(), 8);

    // a second run over a larger grid only adds the missing cells
    let o = bin(&["run", "--task", "star,unstack", "--approach", "proc3s,cap", "--seeds", "0-2", "--out", out]);
    assert!(o.status.success());
    let again = std::fs::read_to_string(dir.path().join("records.ndjson")).unwrap();
    assert_eq!(again.lines().count(), 12);
    for line in records.lines() {
        assert!(again.contains(line));
    }

    let o = bin(&["table", "--in", out]);
    assert!(o.status.success());
    let t = stdout(&o);
    assert!(t.contains("Success rate (%)") && t.contains("Samples used"));

    let ep = dir.path().join("episodes/unstack__proc3s__0.json");
    let svg = dir.path().join("x.svg");
    let o = bin(&["render", "--record", ep.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg") && text.contains("class=\"bowl\""));
    assert_eq!(text, std::fs::read_to_string(dir.path().join("svg/unstack__proc3s__0.svg")).unwrap());
}

#[test]
fn config_override_is_applied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"constants": {"table_bounds": [[-0.4, 0.4], [-0.8, -0.2], [0, 0]]}}"#).unwrap();
    let ep = dir.path().join("ep.json");
    let out = dir.path().join("run");
    let o = bin(&[
        "--config",
        cfg.to_str().unwrap(),
        "run",
        "--task",
        "star",
        "--approach",
        "proc3s",
        "--seeds",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::copy(out.join("episodes/star__proc3s__0.json"), &ep).unwrap();
    let svg = dir.path().join("a.svg");
    let o = bin(&["--config", cfg.to_str().unwrap(), "render", "--record", ep.to_str().unwrap(), "--out", svg.to_str().unwrap(), "--initial"]);
    assert!(o.status.success());
    assert!(std::fs::read_to_string(&svg).unwrap().contains("width=\"800.000\""));
}

#[test]
fn bad_arguments_fail_cleanly() {
    for args in [
        &["run", "--task", "nosuch", "--out", "/nonexistent/x"][..],
        &["run", "--approach", "nosuch"],
        &["run", "--seeds", "5-2"],
        &["table", "--in", "/nonexistent/dir"],
    ] {
        let o = bin(args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert!(!Path::new("/nonexistent/x").exists());
}
