//! End-to-end runs of the `dualcharge` binary on small configurations.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dualcharge");

const SMALL_1D: &str = "\
# two electrons on [-1, 1], kept tiny so the test is fast
dimension = 1
N = 2
beta = 4
M = 4
interval = -1, 1
chains = 2
steps = 4000
max_iters = 4
n_starts = 8
grid_points = 21
";

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("DUALCHARGE_WORKERS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_required_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = SMALL_1D.lines().filter(|l| !l.starts_with("N ")).map(|l| format!("{l}\n")).collect();
    let cfg = write_config(dir.path(), "bad.conf", &text);
    let out = run(&["run", &cfg, "--output-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("`N`"), "{stderr}");
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.conf", &format!("{SMALL_1D}colour = blue\n"));
    let out = run(&["run", &cfg, "--output-dir", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`colour`"));
}

#[test]
fn existing_output_directory_exits_3_without_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.conf", SMALL_1D);
    let out_dir = dir.path().join("out");
    std::fs::create_dir(&out_dir).unwrap();
    let out = run(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(std::fs::read_dir(&out_dir).unwrap().next().is_none(), "nothing may be written");
}

#[test]
fn run_writes_artifacts_deterministically_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.conf", SMALL_1D);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = run(&["run", &cfg, "--output-dir", out_dir.to_str().unwrap(), "--seed", "11"]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["summary.json", "potential.csv", "charge.csv"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between identical runs");
    }
    assert!(a.join("timing.json").exists());

    let potential = std::fs::read_to_string(a.join("potential.csv")).unwrap();
    let header = potential.lines().next().unwrap();
    assert_eq!(header, "r,v,v_beta_4,oracle,deviation");
    assert_eq!(potential.lines().count(), 22);
    let charge = std::fs::read_to_string(a.join("charge.csv")).unwrap();
    assert_eq!(charge.lines().next().unwrap(), "element,lower,upper,weight,charge");
    assert_eq!(charge.lines().count(), 5);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["provenance"]["seed"], 11);
    assert_eq!(summary["oracle"]["oracle"], "comb");
    assert_eq!(summary["provenance"]["config_hash"].as_str().unwrap().len(), 64);

    // re-running into an existing directory needs --overwrite
    let out = run(&["run", &cfg, "--output-dir", a.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["run", &cfg, "--output-dir", a.to_str().unwrap(), "--seed", "11", "--overwrite"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read(a.join("summary.json")).unwrap(), std::fs::read(b.join("summary.json")).unwrap());

    // a loose threshold passes, an impossible one fails
    let ok = run(&["validate", a.to_str().unwrap(), "comb", "--sup-tol", "10", "--mass-tol", "10"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert!(stdout.contains("PASS sup_deviation"), "{stdout}");
    let strict = run(&["validate", a.to_str().unwrap(), "comb", "--sup-tol", "0"]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stdout).contains("FAIL sup_deviation"));
}

#[test]
fn different_seeds_change_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.conf", SMALL_1D);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run(&["run", &cfg, "--output-dir", a.to_str().unwrap(), "--seed", "1"]).status.code(), Some(0));
    assert_eq!(run(&["run", &cfg, "--output-dir", b.to_str().unwrap(), "--seed", "2"]).status.code(), Some(0));
    assert_ne!(
        std::fs::read(a.join("summary.json")).unwrap(),
        std::fs::read(b.join("summary.json")).unwrap()
    );
}

#[test]
fn validate_rejects_an_unknown_oracle() {
    let out = run(&["validate", "nowhere.json", "phlogiston"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_worker_count_is_a_config_error() {
    let out = Command::new(BIN)
        .args(["validate", "nowhere.json", "comb"])
        .env("DUALCHARGE_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
