//! End-to-end runs of the `nldf` binary: exit codes, output schemas, and
//! flag handling.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn nldf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nldf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn temp_path(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nldf-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_default_config_exits_zero() {
    let out = nldf(&["verify", "--samples", "20"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["violations"], 0);
    assert_eq!(v["reports"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_rejects_unknown_instances_with_code_2() {
    let out = nldf(&["verify", "--instance", "definitely_not_a_thing"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn verify_rejects_unknown_check_families_with_code_2() {
    let out = nldf(&["verify", "--checks", "abs,volcano"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("volcano"));
}

#[test]
fn verify_checks_flag_narrows_the_sweep() {
    let out = nldf(&[
        "verify",
        "--samples",
        "5",
        "--checks",
        "abs",
        "--instance",
        "mixed_smooth",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    let checks = v["reports"][0]["report"]["checks"].as_array().unwrap();
    // One family plus the midpoint check on a convex instance.
    assert_eq!(checks.len(), 2);
    assert_eq!(checks[0]["name"], "abs");
}

#[test]
fn verify_accepts_generator_specs() {
    let out = nldf(&[
        "verify",
        "--samples",
        "10",
        "--checks",
        "tent",
        "--instance",
        "nodes=3,kinds=power2:quad,wmin=1,wmax=1",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["reports"][0]["label"], "nodes=3,kinds=power2:quad,wmin=1,wmax=1");
}

#[test]
fn verify_is_reproducible_across_runs() {
    let args = ["verify", "--samples", "15", "--seed", "41"];
    let a = nldf(&args);
    let b = nldf(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(code(&a), code(&b));
}

#[test]
fn verify_sequential_matches_parallel() {
    let base = ["verify", "--samples", "15", "--seed", "7"];
    let par = nldf(&base);
    let seq = nldf(&[&base[..], &["--sequential"]].concat());
    assert_eq!(par.stdout, seq.stdout);
}

#[test]
fn verify_writes_the_out_file_and_keeps_stdout_quiet() {
    let path = temp_path("verify.json");
    let out = nldf(&["verify", "--samples", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["violations"], 0);
}

#[test]
fn verify_csv_has_the_expected_header() {
    let out = nldf(&["verify", "--samples", "5", "--format", "csv", "--checks", "abs"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("instance,check,samples,violations,vacuous,min_slack\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 2);
}

#[test]
fn verify_reads_instance_documents() {
    // Round-trip: verify on a file written by the library loads and passes.
    let path = temp_path("doc.json");
    let e = nldf::harness::mixed_smooth();
    nldf::instance::InstanceDoc::from_energy(&e).save(&path).unwrap();
    let out = nldf(&[
        "verify",
        "--samples",
        "5",
        "--checks",
        "abs",
        "--instance",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["reports"][0]["label"], path.to_str().unwrap());
}

#[test]
fn identities_pass_and_report_deviations() {
    let out = nldf(&["identities", "--samples", "5"]);
    assert_eq!(code(&out), 0);
    let rows = stdout_json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for row in rows {
        assert_eq!(row["pass"], true, "{row}");
        assert!(row["max_deviation"].as_f64().unwrap() <= 1e-12);
    }
}

#[test]
fn identities_checks_flag_selects_kinds() {
    let out = nldf(&["identities", "--samples", "3", "--checks", "cg_median,case1_ids"]);
    assert_eq!(code(&out), 0);
    let rows = stdout_json(&out);
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[0]["identity"], "cg_median");
}

#[test]
fn resolve_matches_the_closed_form() {
    let out = nldf(&[
        "resolve",
        "--instance",
        "two_node_quadratic",
        "--input",
        "1,-1",
        "--lambda",
        "1",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    // Difference 2 contracts by 1/(1+4); the mean 0 is preserved.
    let m0 = v["minimizer"][0].as_f64().unwrap();
    let m1 = v["minimizer"][1].as_f64().unwrap();
    assert!((m0 - 0.2).abs() < 1e-6, "{m0}");
    assert!((m1 + 0.2).abs() < 1e-6, "{m1}");
    assert_eq!(v["converged"], true);
}

#[test]
fn resolve_rejects_nonpositive_lambda_with_code_2() {
    let out = nldf(&["resolve", "--lambda", "0"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn resolve_reads_stored_functions_by_name() {
    let path = temp_path("with_fn.json");
    let e = nldf::harness::two_node_quadratic();
    let f = nldf::L2Fn::new(e.space().clone(), vec![3.0, 1.0]).unwrap();
    nldf::instance::InstanceDoc::from_energy(&e)
        .with_function("start", &f)
        .save(&path)
        .unwrap();
    let out = nldf(&[
        "resolve",
        "--instance",
        path.to_str().unwrap(),
        "--input",
        "start",
        "--lambda",
        "0.25",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["input"][0], 3.0);
    // Difference 2 contracts by 1/(1+1) around the preserved mean 2.
    assert!((v["minimizer"][0].as_f64().unwrap() - 2.5).abs() < 1e-6);
}

#[test]
fn evolve_approaches_the_semigroup_limit() {
    let out = nldf(&[
        "evolve",
        "--instance",
        "two_node_quadratic",
        "--input",
        "1,-1",
        "--t",
        "0.25",
        "--steps",
        "100",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let diff = v["result"][0].as_f64().unwrap() - v["result"][1].as_f64().unwrap();
    let expected = 2.0_f64 / (1.0_f64 + 0.01).powi(100);
    assert!((diff - expected).abs() < 1e-4, "{diff} vs {expected}");
    assert_eq!(v["objectives"].as_array().unwrap().len(), 100);
}

#[test]
fn fuzz_reports_expected_violations_with_code_3() {
    let out = nldf(&["fuzz", "--samples", "40"]);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!(v["outcome"]["expected_violations"].as_u64().unwrap() >= 1);
    assert_eq!(v["outcome"]["violations"], 0);
    // The midpoint search produces an explicit witness pair.
    let w = &v["midpoint_witnesses"][0];
    assert!(w["slack"].as_f64().unwrap() < 0.0, "{w}");
}

#[test]
fn demo_prints_the_worked_examples() {
    let out = nldf(&["demo"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("exactly -0.5"));
    assert!(text.contains("0 violations"));
}

#[test]
fn bad_flags_exit_2() {
    let out = nldf(&["verify", "--samples", "not_a_number"]);
    assert_eq!(code(&out), 2);
    let out = nldf(&["no_such_subcommand"]);
    assert_eq!(code(&out), 2);
}
