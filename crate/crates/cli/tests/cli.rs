use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"variant = "app_default"
tau = 2.0
megabatches = 2
dataset = "synthetic_blobs"
classes = 3
per_class = 30
dim = 4
noise = 0.5
hidden = [8]
epochs = 2
seed = 3
"#;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anytime-prune"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let out = cli(&["run", "tiny.toml", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = dir.path().join("r");
    for f in ["summary.json", "curves.csv", "timing.json", "cer.svg"] {
        assert!(r.join(f).is_file(), "{f}");
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("CER"));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    assert!(cli(&["run", "tiny.toml", "--out", "a"], dir.path()).status.success());
    assert!(cli(&["run", "tiny.toml", "--out", "b", "--seed", "99"], dir.path()).status.success());
    let read = |d: &str| fs::read_to_string(dir.path().join(d).join("predictions.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn bad_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), TINY.replace("tau = 2.0", "tau = 0.5")).unwrap();
    let out = cli(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));

    fs::write(dir.path().join("typo.toml"), format!("{TINY}colour = 1\n")).unwrap();
    assert_eq!(cli(&["run", "typo.toml"], dir.path()).status.code(), Some(1));
    assert_eq!(cli(&["run", "missing.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    // Parses fine, but 30 samples cannot fill 50 megabatches.
    fs::write(dir.path().join("big.toml"), TINY.replace("megabatches = 2", "megabatches = 50")).unwrap();
    let out = cli(&["run", "big.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(cli(&["plot", "nowhere"], dir.path()).status.code(), Some(2));
}

#[test]
fn sweep_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    fs::write(cfgs.join("a.toml"), TINY).unwrap();
    fs::write(cfgs.join("b.toml"), TINY.replace("app_default", "baseline")).unwrap();
    let out = cli(&["sweep", "cfgs", "--out", "runs", "--parallel", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let a = dir.path().join("runs/a");
    assert!(dir.path().join("runs/b/summary.json").is_file());
    fs::remove_file(a.join("gen_gap.svg")).unwrap();
    assert!(cli(&["plot", "runs/a"], dir.path()).status.success());
    assert!(a.join("gen_gap.svg").is_file());
}
