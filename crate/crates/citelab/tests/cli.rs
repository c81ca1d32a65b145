//! End-to-end tests of the `citelab` binary: artifact formats, provenance
//! comments, and error paths.

use std::path::Path;
use std::process::{Command, Output};

fn citelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_str(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn predict_prints_the_closed_form() {
    let out = citelab(&["predict", "--lambda", "1", "--m", "3"]);
    assert!(out.status.success());
    assert!(stdout_str(&out).starts_with("5.154845"), "{}", stdout_str(&out));

    let out = citelab(&["predict", "--lambda", "0", "--m", "10"]);
    assert_eq!(stdout_str(&out).trim(), "0");
}

#[test]
fn verify_fixed_point_reports_a_true_verdict() {
    let out = citelab(&[
        "verify-fixed-point",
        "--lambda",
        "5",
        "--kernel",
        "lognormal:0,1",
        "--t-end",
        "100",
    ]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(json["report"]["verdict"], true);
    let dev = json["report"]["max_abs_deviation"].as_f64().unwrap();
    assert!(dev <= 1e-8, "max_abs_deviation {dev}");
    assert!(json["meta"]["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn simulate_emits_provenance_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ensemble.csv");
    let out = citelab(&[
        "simulate",
        "--variant",
        "literal",
        "--lambda",
        "2",
        "--replicas",
        "100",
        "--seed",
        "7",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let content = std::fs::read_to_string(&path).unwrap();
    assert!(content.starts_with("# citelab v"));
    assert!(content.contains("seed=7"));
    assert!(content.contains("dt,mean_c,stderr_c"));
    // Literal reading: every mean is zero.
    for line in content.lines().filter(|l| !l.starts_with('#') && !l.starts_with("dt,")) {
        let mean: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean, 0.0);
    }
}

#[test]
fn integrate_trajectory_reaches_the_ultimate_count() {
    let out = citelab(&[
        "integrate",
        "--variant",
        "with-m",
        "--lambda",
        "1",
        "--kernel",
        "exponential:1",
        "--t-end",
        "40",
        "--m",
        "3",
    ]);
    assert!(out.status.success());
    let body = stdout_str(&out);
    let last = body.lines().last().unwrap();
    let c_implied: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!((c_implied - 3.0 * (1.0f64.exp() - 1.0)).abs() < 1e-6, "{last}");
}

#[test]
fn system_histories_round_trip_and_follow_the_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("system.csv");
    let out = citelab(&[
        "system",
        "--variant",
        "with-m",
        "--t-end",
        "20",
        "--n0",
        "50",
        "--beta",
        "0.1",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let histories = citelab::io::parse_history_path(&path).unwrap();
    let expected = (50.0 * (0.1f64 * 20.0).exp()).floor() as usize;
    assert_eq!(histories.len(), expected);
    let total: u64 = histories.iter().map(|h| h.final_count()).sum();
    assert!(total > 0);
}

#[test]
fn fit_recovers_from_exported_histories() {
    // Build synthetic exhausted histories through the library, export them,
    // then fit through the CLI.
    use citelab::model::{AgingKernel, KernelVariant};
    use citelab::sim::{simulate_single, Horizon, SimConfig};

    let kernel = AgingKernel::log_normal(1.0, 0.8).unwrap();
    let cfg = SimConfig::new(
        KernelVariant::WithAttractiveness,
        1.0,
        3,
        kernel,
        Horizon::Exhaust,
        11,
        60,
    )
    .unwrap();
    let histories: Vec<_> = (0..60).map(|k| simulate_single(&cfg, k).unwrap()).collect();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("histories.csv");
    let meta = citelab::io::ReportMeta::new(&"cli-test", 11);
    let mut buf = Vec::new();
    citelab::io::write_history_csv(&mut buf, &histories, &meta).unwrap();
    std::fs::write(&path, buf).unwrap();

    let out = citelab(&[
        "fit",
        "--input",
        path.to_str().unwrap(),
        "--m",
        "3",
        "--kernel-kind",
        "lognormal",
        "--observation-end",
        &format!("{}", kernel.default_t_end()),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let lambda_hat = json["report"]["lambda_hat"].as_f64().unwrap();
    assert!((lambda_hat - 1.0).abs() < 0.35, "lambda_hat {lambda_hat}");
    let predicted = json["report"]["predicted_ultimate"].as_f64().unwrap();
    assert!((predicted - 3.0 * (lambda_hat.exp() - 1.0)).abs() < 1e-9);
}

#[test]
fn arbitrate_writes_markdown_and_json_consistently() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("verdict.json");
    let md_path = dir.path().join("verdict.md");
    let out = citelab(&[
        "arbitrate",
        "--lambda",
        "1",
        "--m",
        "3",
        "--replicas",
        "2000",
        "--seed",
        "5",
        "--out-json",
        json_path.to_str().unwrap(),
        "--out-md",
        md_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_str(&out));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let md = std::fs::read_to_string(&md_path).unwrap();
    assert_eq!(json["rows"][0]["variant"], "literal");
    assert_eq!(json["rows"][0]["sim_mean"].as_f64().unwrap(), 0.0);
    assert!(md.contains("| literal |"));
    assert!(md.contains("| with_attractiveness |"));
    // Shared provenance between the two renderings.
    let hash = json["meta"]["config_hash"].as_str().unwrap();
    assert!(md.contains(hash));

    // Without output paths the markdown goes to stdout.
    let out = citelab(&["arbitrate", "--lambda", "0", "--m", "3", "--replicas", "100"]);
    assert!(out.status.success());
    assert!(stdout_str(&out).contains("# Arbitration report"));
}

#[test]
fn malformed_input_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "paper_id,pub_time,event_time\np1,0,1\np2,zero,2\n").unwrap();
    let out = citelab(&["fit", "--input", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_str(&out).contains("line 3"), "{}", stderr_str(&out));
}

#[test]
fn event_before_publication_names_the_paper() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "paper_id,pub_time,event_time\nculprit,5,1\n").unwrap();
    let out = citelab(&["fit", "--input", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_str(&out).contains("culprit"), "{}", stderr_str(&out));
}

#[test]
fn unknown_flags_and_bad_values_exit_nonzero() {
    assert!(!citelab(&["no-such-command"]).status.success());
    assert!(!citelab(&["predict", "--lambda", "not-a-number"]).status.success());
    assert!(!citelab(&["predict", "--lambda", "-1", "--m", "3"]).status.success());
    assert!(!citelab(&["simulate", "--variant", "literal", "--lambda", "1", "--kernel", "weibull:1"])
        .status
        .success());
    let out = citelab(&["simulate", "--variant", "literal", "--lambda", "1", "--horizon", "-5"]);
    assert!(!out.status.success());
}

#[test]
fn missing_output_directory_fails_before_simulating() {
    let started = std::time::Instant::now();
    let out = citelab(&[
        "arbitrate",
        "--lambda",
        "1",
        "--replicas",
        "1000000",
        "--out-json",
        "/no/such/dir/report.json",
    ]);
    assert!(!out.status.success());
    assert!(stderr_str(&out).contains("does not exist"), "{}", stderr_str(&out));
    // The path check must precede the (large) simulation.
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn verify_fixed_point_artifact_is_reproducible() {
    let run = || {
        let out = citelab(&[
            "verify-fixed-point",
            "--lambda",
            "2",
            "--kernel",
            "uniform:10",
            "--seed",
            "9",
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn help_lists_every_subcommand() {
    let out = citelab(&["--help"]);
    let text = stdout_str(&out);
    for sub in ["simulate", "system", "integrate", "verify-fixed-point", "fit", "predict", "arbitrate"] {
        assert!(text.contains(sub), "missing {sub} in help");
    }
    assert!(Path::new(env!("CARGO_BIN_EXE_citelab")).exists());
}
