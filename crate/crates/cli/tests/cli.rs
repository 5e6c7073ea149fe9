//! End-to-end tests of the `conekit` binary: exit codes, JSON output,
//! determinism, and config precedence.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_conekit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_model_is_an_error() {
    let out = run(&["cone", "--model", "no_such_shape", "--point", "0,0", "--kind", "tan+"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn absolute_value_is_flagged_not_differentiable() {
    let out = run(&["diff", "--fn", "abs(x1)", "--domain", "r1", "--point", "0"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["status"], "NOT_DIFFERENTIABLE");
    assert_eq!(doc["tool"]["name"], "conekit");
}

#[test]
fn smooth_function_is_differentiable_with_the_right_gradient() {
    let out = run(&["diff", "--fn", "3*x1 + x2^2", "--domain", "r2", "--point", "0,0"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["status"], "DIFFERENTIABLE");
    let l = doc["report"]["L"].as_array().unwrap();
    assert!((l[0].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert!(l[1].as_f64().unwrap().abs() < 1e-3);
}

#[test]
fn cone_membership_on_the_quadrant() {
    let out = run(&["cone", "--model", "quadrant", "--point", "0,0", "--kind", "tan+"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["kind"], "TAN_UPPER");
    assert!(doc["report"]["dirs"].as_array().unwrap().len() >= 8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let args = ["cone", "--model", "kinked_b", "--point", "0,0", "--kind", "tan-", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = std::env::temp_dir().join("conekit-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("probe.toml");
    std::fs::write(&cfg_path, "eps = 0.01\nseed = 11\n").unwrap();
    let cfg_arg = cfg_path.to_str().unwrap();

    let out = run(&[
        "cone", "--model", "quadrant", "--point", "0,0", "--kind", "tan+",
        "--config", cfg_arg,
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["config"]["eps"].as_f64().unwrap(), 0.01);
    assert_eq!(doc["config"]["seed"].as_u64().unwrap(), 11);

    let out = run(&[
        "cone", "--model", "quadrant", "--point", "0,0", "--kind", "tan+",
        "--config", cfg_arg, "--eps", "0.002",
    ]);
    let doc = stdout_json(&out);
    assert_eq!(doc["config"]["eps"].as_f64().unwrap(), 0.002);
    assert_eq!(doc["config"]["seed"].as_u64().unwrap(), 11);
}

#[test]
fn violated_optimality_reports_a_witness_and_exit_3() {
    let out = run(&[
        "regula", "--gradient", "1,1", "--feasible", "disc", "--point", "1,0",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["satisfied"], false);
    assert!(!doc["report"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn satisfied_optimality_exits_0() {
    let out = run(&[
        "regula", "--gradient", "1,0", "--feasible", "disc", "--point", "1,0",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["satisfied"], true);
}

#[test]
fn single_corpus_case_passes() {
    let out = run(&["corpus", "--case", "factorial_sequence"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["cases"][0]["name"], "factorial_sequence");
}

#[test]
fn expression_errors_point_at_the_offending_byte() {
    let out = run(&["diff", "--fn", "x1 + * 2", "--domain", "r1", "--point", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("byte 5"), "stderr: {stderr}");
}

#[test]
fn golden_summary_matches_a_full_default_run() {
    // the repository-root golden file; regenerate with `corpus --golden-update`
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../golden/corpus.json");
    if !golden.exists() {
        panic!("golden summary missing: {}", golden.display());
    }
    let out = run(&["corpus", "--golden", golden.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
