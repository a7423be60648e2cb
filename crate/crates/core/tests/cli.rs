//! End-to-end tests of the command-line surface: flag handling, exit codes
//! and file outputs.

use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momgmm")).args(args).output().expect("binary runs")
}

fn scratch(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("momgmm-cli-{label}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_prints_usage() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Usage: momgmm"));
}

#[test]
fn unknown_command_is_usage_error() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_rejects_zero_observations() {
    let dir = scratch("p0");
    let out = run(&[
        "sample",
        "--benchmark",
        "4,2,0.05",
        "--p",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_requires_model_or_benchmark() {
    let dir = scratch("nomodel");
    let out = run(&["sample", "--p", "10", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_writes_expected_files() {
    let dir = scratch("sample");
    let out = run(&[
        "sample",
        "--benchmark",
        "5,2,0.05",
        "--p",
        "64",
        "--seed",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = std::fs::read_to_string(dir.join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 64);
    assert_eq!(samples.lines().next().unwrap().split(',').count(), 5);
    let truth = std::fs::read_to_string(dir.join("truth.csv")).unwrap();
    assert!(truth.starts_with("kind,diagonal"));
    let manifest = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"command\": \"sample\""));
    assert!(manifest.contains("\"seed\": 3"));
}

#[test]
fn fit_missing_data_file_is_exit_two() {
    let dir = scratch("missing");
    let out = run(&[
        "fit",
        "--data",
        "/nonexistent/samples.csv",
        "--m",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn fit_rejects_out_of_range_order() {
    let dir = scratch("order");
    run(&[
        "sample",
        "--benchmark",
        "3,2,0.05",
        "--p",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let data = dir.join("samples.csv");
    for bad in ["0", "19"] {
        let out = run(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--m",
            "2",
            "--d",
            bad,
            "--out",
            dir.join("fit").to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "d = {bad} accepted");
    }
}

#[test]
fn fit_debias_requires_sigma() {
    let dir = scratch("nosigma");
    run(&[
        "sample",
        "--benchmark",
        "3,2,0.05",
        "--p",
        "50",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = run(&[
        "fit",
        "--data",
        dir.join("samples.csv").to_str().unwrap(),
        "--m",
        "2",
        "--mode",
        "debias",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
}

#[test]
fn fit_mom_writes_report_with_metrics() {
    let dir = scratch("mom");
    run(&[
        "sample",
        "--benchmark",
        "4,2,0.05",
        "--p",
        "400",
        "--seed",
        "5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = run(&[
        "fit",
        "--data",
        dir.join("samples.csv").to_str().unwrap(),
        "--m",
        "2",
        "--d",
        "3",
        "--restarts",
        "3",
        "--seed",
        "2",
        "--truth",
        dir.join("truth.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.join("fit/report.csv")).unwrap();
    let mut lines = report.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("restart,final_objective,loglik,mom_objective"));
    assert!(header.ends_with("cosine_angle"));
    assert_eq!(lines.clone().count(), 3);
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 9);
        // Metrics populated because --truth was given.
        assert!(!fields[5].is_empty());
        assert!(fields[8].parse::<f64>().unwrap() <= 1.0 + 1e-12);
    }
    let fitted = std::fs::read_to_string(dir.join("fit/fitted.csv")).unwrap();
    assert!(fitted.starts_with("kind,diagonal"));
}

#[test]
fn fit_em_reports_loglik_and_moment_objective() {
    let dir = scratch("em");
    run(&[
        "sample",
        "--benchmark",
        "4,2,0.05",
        "--p",
        "400",
        "--seed",
        "8",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = run(&[
        "fit",
        "--data",
        dir.join("samples.csv").to_str().unwrap(),
        "--m",
        "2",
        "--d",
        "3",
        "--method",
        "em",
        "--restarts",
        "2",
        "--seed",
        "2",
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.join("fit/report.csv")).unwrap();
    for line in report.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        // loglik and the post-hoc moment objective are both populated.
        assert!(fields[2].parse::<f64>().is_ok());
        assert!(fields[3].parse::<f64>().is_ok());
        // No truth given: metrics empty.
        assert!(fields[5].is_empty());
    }
}

#[test]
fn fit_debias_with_sigma_file_recovers_means() {
    let dir = scratch("debias");
    // Write the common-covariance model and its noise covariance by hand.
    let model = "kind,diagonal\ndims,2,3\n\
                 weights,0.4,0.3,0.3\n\
                 mean,1.0,-1.0\nmean,1.0,1.0\nmean,-1.0,1.0\n\
                 stddev,0.6,0.6\nstddev,0.6,0.6\nstddev,0.6,0.6\n";
    std::fs::write(dir.join("model.csv"), model).unwrap();
    std::fs::write(dir.join("sigma.csv"), "stddev,0.6,0.6\n").unwrap();
    run(&[
        "sample",
        "--model",
        dir.join("model.csv").to_str().unwrap(),
        "--p",
        "3000",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    let out = run(&[
        "fit",
        "--data",
        dir.join("samples.csv").to_str().unwrap(),
        "--m",
        "3",
        "--d",
        "3",
        "--mode",
        "debias",
        "--sigma",
        dir.join("sigma.csv").to_str().unwrap(),
        "--restarts",
        "4",
        "--seed",
        "3",
        "--truth",
        dir.join("truth.csv").to_str().unwrap(),
        "--out",
        dir.join("fit").to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.join("fit/report.csv")).unwrap();
    let best_cosine = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(8).unwrap().parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(best_cosine > 0.95, "best cosine {best_cosine}");
}

#[test]
fn validate_identities_exit_zero() {
    let dir = scratch("validate");
    let out = run(&[
        "validate",
        "--experiment",
        "identities",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.join("identity_checks.csv")).unwrap();
    assert!(table.lines().count() > 4);
    assert!(!table.contains(",false"));
}

#[test]
fn validate_unknown_experiment_is_usage_error() {
    let out = run(&["validate", "--experiment", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}
