use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dp-audit");

const SMALL: &[&str] = &[
    "--synthetic-dim",
    "8",
    "--synthetic-size",
    "24",
    "--arch",
    "mlp:4",
    "--iterations",
    "4",
    "--models-per-arm",
    "8",
    "--craft-steps",
    "5",
    "--threads",
    "1",
];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn dp-audit")
}

fn run_in(dir: &Path, sub: &[&str]) -> Output {
    let mut args: Vec<&str> = sub.to_vec();
    args.push("--out-dir");
    args.push(dir.to_str().unwrap());
    args.extend_from_slice(SMALL);
    let out = run(&args);
    assert!(
        out.status.success(),
        "{sub:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn calibrate_prints_consistent_sigma() {
    let out = run(&["calibrate", "--epsilon", "10", "--steps", "30"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key} = ")))
            .unwrap_or_else(|| panic!("no {key} in {text}"))
            .parse()
            .unwrap()
    };
    assert!((value("sigma") - 2.738).abs() < 1e-3);
    assert!((value("epsilon_check") - 10.0).abs() < 1e-6);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["calibrate", "--epsilon", "1"]).status.code(), Some(1));
    assert_eq!(run(&["train-ensemble"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(run(&["train-ensemble", "--out-dir", d, "--preset", "nope"]).status.code(), Some(1));
    assert_eq!(run(&["train-ensemble", "--out-dir", d, "--set", "bogus=1"]).status.code(), Some(1));
    assert_eq!(run(&["train-ensemble", "--out-dir", d, "--models-per-arm", "1"]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("e2e"));
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["audit", "--out-dir", d]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let missing = dir.path().join("absent.txt");
    let out = run(&["train-ensemble", "--config", missing.to_str().unwrap(), "--out-dir", d]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn staged_commands_produce_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_in(d, &["train-ensemble"]);
    assert!(d.join("config.txt").is_file());
    assert!(d.join("canary.sample").is_file());
    run_in(d, &["craft", "--objective", "fisher"]);
    assert!(d.join("samples/fisher.sample").is_file());
    run_in(d, &["audit"]);
    run_in(d, &["audit", "--sample", "fisher"]);
    assert!(d.join("audits/canary.report.txt").is_file());
    assert!(d.join("audits/fisher.observations.csv").is_file());
    run_in(d, &["report", "--summary"]);
    let csv = fs::read_to_string(d.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("objective,eps_target,N_eval,fpr_bar,fnr_bar,mu_emp,eps_emp,tau,direction,seed")
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().any(|r| r.starts_with("canary,")));
    assert!(rows.iter().any(|r| r.starts_with("fisher,")));
    assert!(rows.iter().any(|r| r.ends_with(",mean")));
}

#[test]
fn saved_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    run_in(&a, &["e2e", "--objectives", "canary,l2"]);
    let b = dir.path().join("b");
    let cfg = a.join("config.txt");
    let out = run(&[
        "e2e",
        "--objectives",
        "canary,l2",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = |d: &Path| fs::read(d.join("report.csv")).unwrap();
    assert_eq!(report(&a), report(&b));
}
