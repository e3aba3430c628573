//! The binary against direct harness calls: same report bytes, exit codes.

use randcover::covering::StageWindow;
use randcover::harness;
use randcover::lengths::LengthSequenceSpec;
use randcover::report::ExperimentReport;
use randcover::targets::TargetSetSpec;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_randcover");

fn run(dir: &Path, config: &str, extra: &[&str]) -> (i32, String, String) {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn json_of(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(format!("{name}.json"))).unwrap()
}

fn cfg(experiment: &str, seed: u64, trials: u64, params: &str) -> String {
    format!("experiment = \"{experiment}\"\nseed = {seed}\ntrials = {trials}\n[params]\n{params}")
}

fn assert_routes(config: String, direct: ExperimentReport) {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = run(dir.path(), &config, &[]);
    let want = if direct.verdict == randcover::report::Verdict::Fail { 1 } else { 0 };
    assert_eq!(code, want, "{stdout}{stderr}");
    assert!(stdout.starts_with(&direct.name), "{stdout}");
    assert_eq!(json_of(dir.path(), &direct.name), direct.to_json() + "\n");
    let csv = std::fs::read_to_string(dir.path().join(format!("{}.csv", direct.name))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,check,estimate,lo,hi,theory_value,theory_kind,applicable,verdict"
    );
    assert_eq!(lines.count(), direct.checks.len());
}

#[test]
fn every_experiment_routes_to_the_harness() {
    let pl1 = LengthSequenceSpec::power_law(1.0, 1).unwrap();
    assert_routes(
        cfg(
            "verify_moment_lemma",
            5,
            300,
            "n0 = 2\nn = 20\nwindow = { first = 2, last = 257 }\nspec = { variant = \"power_law\", alpha = 1.0, c = 0.5, d = 1 }\n",
        ),
        harness::verify_moment_lemma(2, 20, &pl1, StageWindow::new(2, 257).unwrap(), 300, 5).unwrap(),
    );
    assert_routes(
        cfg("verify_coincidence_lemma", 6, 500, "n0 = 0\nn = 8\ns = 0.6\nt = 0.6\nd = 1\n"),
        harness::verify_coincidence_lemma(0, 8, 0.6, 0.6, 1, 500, 6).unwrap(),
    );
    assert_routes(
        cfg("verify_covering_lemma", 7, 500, "eta = 0.015625\nbeta = 0.5\nalpha = 0.9\nc = 1.0\nC = 1.0\n"),
        harness::verify_covering_lemma(2f64.powi(-6), 0.5, 0.9, 1.0, 1.0, 500, 7).unwrap(),
    );
    let pl = LengthSequenceSpec::power_law(0.5, 1).unwrap();
    let windows = [StageWindow::new(10, 100).unwrap(), StageWindow::new(100, 1000).unwrap(), StageWindow::new(1000, 10000).unwrap()];
    assert_routes(
        cfg(
            "dichotomy_experiment",
            8,
            100,
            "spec = { variant = \"power_law\", alpha = 0.5, c = 0.5, d = 1 }\n\
             target = { variant = \"single_point\", x = 0.3 }\n\
             windows = [{ first = 10, last = 100 }, { first = 100, last = 1000 }, { first = 1000, last = 10000 }]\n",
        ),
        harness::dichotomy_experiment(&pl, &TargetSetSpec::SinglePoint { x: 0.3 }, None, &windows, 100, 8).unwrap(),
    );
    let s = [0.5, 0.75, 0.875];
    let e = [0.5, 0.25, 0.125];
    assert_routes(
        cfg("prop13_experiment", 9, 100, "s = [0.5, 0.75, 0.875]\neps = [0.5, 0.25, 0.125]\ndepth = 3\n"),
        harness::prop13_experiment(&s, &e, 3, 100, 9, false).unwrap(),
    );
    assert_routes(
        cfg("prop14_experiment", 10, 2, "t = 0.3\nalpha = 0.6\ndepth = 3\n"),
        harness::prop14_experiment(0.3, 0.6, 3, 2, 10).unwrap(),
    );
}

#[test]
fn rerun_is_byte_identical_and_threads_do_not_matter() {
    let config = cfg("verify_covering_lemma", 11, 2000, "eta = 0.00390625\nbeta = 0.5\nalpha = 0.9\nc = 1.0\nC = 1.0\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), &config, &[]).0, 0);
    assert_eq!(run(b.path(), &config, &["--threads", "1"]).0, 0);
    assert_eq!(json_of(a.path(), "verify_covering_lemma"), json_of(b.path(), "verify_covering_lemma"));
}

#[test]
fn overrides_and_format() {
    let config = cfg("verify_coincidence_lemma", 1, 10, "n0 = 0\nn = 8\ns = 0.6\nt = 0.6\nd = 1\n");
    let dir = tempfile::tempdir().unwrap();
    let (code, ..) = run(dir.path(), &config, &["--seed", "4", "--trials", "300", "--format", "json"]);
    assert_eq!(code, 0);
    assert!(!dir.path().join("verify_coincidence_lemma.csv").exists());
    let direct = harness::verify_coincidence_lemma(0, 8, 0.6, 0.6, 1, 300, 4).unwrap();
    assert_eq!(json_of(dir.path(), "verify_coincidence_lemma"), direct.to_json() + "\n");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(
        dir.path(),
        &cfg("verify_covering_lemma", 1, 10, "eta = 0.015625\nbeta = 0.9\nalpha = 0.5\nc = 1.0\nC = 1.0\n"),
        &[],
    );
    assert_eq!(code, 2);
    assert!(err.contains("beta < alpha"), "{err}");

    let (code, _, err) = run(dir.path(), "experiment = \"nope\"\nseed = 1\ntrials = 1\n[params]\n", &[]);
    assert_eq!(code, 2, "{err}");

    let (code, _, err) = run(
        dir.path(),
        &cfg("prop13_experiment", 1, 10, "s = [0.5]\neps = [0.0]\ndepth = 1\n"),
        &[],
    );
    assert_eq!(code, 3, "{err}");

    let out = Command::new(BIN).arg("--help").output().unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success());
    assert!(help.contains("theory_kind") && help.contains("EXIT CODES"));
}
