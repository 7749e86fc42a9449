use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shrinklab_cli::scenarios;

fn shrinklab(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shrinklab"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env(shrinklab::ensemble::THREADS_ENV, t);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// Every file of `dir`, sorted by name.
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn list_names_every_scenario() {
    let out = shrinklab(&["list"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(scenarios::names().len(), 8);
    for name in scenarios::names() {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn validate_echoes_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "h.conf", "scenario = hedging\nn_paths = 50\n\n[hedging]\nz_max = 4\n");
    let out = shrinklab(&["validate", &cfg], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("ok\n"));
    assert!(text.contains("n_paths = 50\n"));
    assert!(text.contains("z_max = 4\n"));
    assert!(text.lines().any(|l| l.starts_with("seed = ") && l.ends_with("# default")));
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "scenario = hedging\n[hedging]\nz_maximum = 4\n");
    let out = shrinklab(&["validate", &cfg], None);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.conf:3"), "{err}");
    assert!(err.contains("z_maximum"), "{err}");

    let cfg = write(dir.path(), "range.conf", "scenario = hedging\nn_paths = 0\n");
    assert_eq!(shrinklab(&["validate", &cfg], None).status.code(), Some(2));
    let cfg = write(dir.path(), "name.conf", "scenario = nothing\n");
    assert_eq!(shrinklab(&["run", &cfg], None).status.code(), Some(2));
    assert_eq!(shrinklab(&["run", "/nonexistent/x.conf"], None).status.code(), Some(2));
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let text = "scenario = brownian-checks\nn_paths = 300\nsteps = 2000\n";
    let cfg = write(dir.path(), "b.conf", text);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let ra = shrinklab(&["run", &cfg, "--out", a.to_str().unwrap()], Some("1"));
    let rb = shrinklab(&["run", &cfg, "--out", b.to_str().unwrap()], Some("3"));
    let rc = shrinklab(&["run", &cfg, "--out", c.to_str().unwrap()], None);
    assert_eq!(ra.status.code(), rb.status.code());
    assert_eq!(ra.status.code(), rc.status.code());
    assert_eq!(ra.stdout, rb.stdout);
    let files = artifacts(&a);
    assert!(files.iter().any(|(n, _)| n.ends_with(".csv")));
    assert!(files.iter().any(|(n, _)| n == "report.txt"));
    assert_eq!(files, artifacts(&b));
    assert_eq!(files, artifacts(&c));
}

#[test]
fn exit_code_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.conf", "scenario = incompleteness\nn_paths = 2000\n");
    let out = shrinklab(&["run", &ok], None);
    let report = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{report}");
    assert!(report.lines().any(|l| l.starts_with("[C10]") && l.ends_with("PASS")));
    assert!(report.trim_end().ends_with("result: PASS"));

    // an unreachable tolerance must fail the run
    let bad = write(
        dir.path(),
        "bad.conf",
        "scenario = brownian-checks\nn_paths = 200\nsteps = 1000\n[brownian-checks]\nqv_mean_min = 1.5\nqv_mean_max = 2\n",
    );
    let out = shrinklab(&["run", &bad], None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("failed:") && err.contains("C1"), "{err}");
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let out = shrinklab(&["validate", p.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(0), "{}", p.display());
        seen += 1;
    }
    assert_eq!(seen, 8);
}
