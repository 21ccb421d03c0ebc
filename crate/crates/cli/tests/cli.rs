//! End-to-end runs of the installed binary: the generate → gamp → estimate
//! pipeline, the limit/roc printers, and a miniature experiment sweep.

use std::path::Path;
use std::process::Command;

fn csmet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_csmet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &std::process::Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed ({}):\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_generate_gamp_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let instance = dir.path().join("instance.txt");
    let channel = dir.path().join("channel.csv");
    let estimate = dir.path().join("estimate.csv");

    let out = csmet(&[
        "generate",
        "--sparsity", "0.1",
        "--n", "200",
        "--m", "120",
        "--seed", "9",
        "--out", instance.to_str().unwrap(),
    ]);
    assert_ok(&out, "generate");
    assert!(instance.exists());

    let out = csmet(&[
        "gamp",
        "--instance", instance.to_str().unwrap(),
        "--max-iterations", "200",
        "--out", channel.to_str().unwrap(),
    ]);
    assert_ok(&out, "gamp");
    assert!(channel.exists());

    let out = csmet(&[
        "estimate",
        "--instance", instance.to_str().unwrap(),
        "--gamp-result", channel.to_str().unwrap(),
        "--metric", "absolute",
        "--out", estimate.to_str().unwrap(),
    ]);
    assert_ok(&out, "estimate");
    let body = std::fs::read_to_string(&estimate).unwrap();
    assert_eq!(body.lines().count(), 201, "header plus one row per component");
}

#[test]
fn limit_and_roc_print_tables() {
    let out = csmet(&[
        "limit",
        "--metric", "support",
        "--sparsity", "0.03",
        "--mu", "1e-2",
        "--n", "1000",
    ]);
    assert_ok(&out, "limit");
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text.trim().lines().last().unwrap().split(',').last().unwrap().parse().unwrap();
    assert!(value > 0.0 && value < 1000.0, "limit value {value}");

    let out = csmet(&["roc", "--mu", "1e-2", "--points", "5"]);
    assert_ok(&out, "roc");
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 6, "header plus five beta rows:\n{text}");
}

#[test]
fn experiment_writes_artifacts_and_is_deterministic() {
    let run = |dir: &Path| {
        let out = csmet(&[
            "experiment",
            "--scenario", "gaussian_awgn",
            "--n", "150",
            "--ratios", "0.4",
            "--trials", "2",
            "--metrics", "absolute,support",
            "--base-seed", "3",
            "--output-dir", dir.to_str().unwrap(),
        ]);
        assert_ok(&out, "experiment");
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for name in ["records.csv", "aggregate.csv", "diagnostics.csv", "timings.csv"] {
        assert!(a.path().join(name).exists(), "{name} missing");
    }
    assert!(a.path().join("metric_absolute.svg").exists());
    for name in ["records.csv", "aggregate.csv", "diagnostics.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} not byte-identical across reruns");
    }
}

#[test]
fn invalid_arguments_exit_nonzero() {
    let out = csmet(&["limit", "--metric", "nonsense", "--mu", "1e-2"]);
    assert!(!out.status.success());
}
