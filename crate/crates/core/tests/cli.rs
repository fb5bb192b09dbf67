//! End-to-end tests of the `htdp` binary: golden outputs, schema
//! conformance, exit codes, and independence from the worker count.

use std::process::{Command, Output};

use serde_json::Value;

fn htdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_htdp"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout should be one JSON document")
}

fn stderr_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(2));
    serde_json::from_slice(&out.stderr).expect("stderr should be one JSON document")
}

fn assert_valid(schema_name: &str, instance: &Value) {
    let path = format!(
        "{}/../../docs/schemas/{schema_name}",
        env!("CARGO_MANIFEST_DIR")
    );
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(&path).expect("schema file")).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema should compile");
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{e}"))
        .collect();
    assert!(
        errors.is_empty(),
        "instance violates {schema_name}: {errors:?}\ninstance: {instance}"
    );
}

#[test]
fn srs_eps0_golden_value() {
    let out = htdp(&[
        "srs", "--N", "4", "--n", "1", "--mt", "1", "--Mt", "3", "--query", "eps0",
    ]);
    let v = stdout_json(&out);
    assert_valid("srs.schema.json", &v);
    assert_eq!(v["schema"], "htdp/1");
    assert_eq!(v["epsilon_at_delta0"].as_f64().unwrap(), 2.0f64.ln());
    // The exact decimal digits are part of the documented interface.
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.6931471805599453"));
}

#[test]
fn srs_unattainable_delta0_prints_inf() {
    let out = htdp(&[
        "srs", "--N", "4", "--n", "2", "--mt", "1", "--Mt", "3", "--query", "eps0",
    ]);
    let v = stdout_json(&out);
    assert_valid("srs.schema.json", &v);
    assert_eq!(v["epsilon_at_delta0"], "inf");
}

#[test]
fn srs_delta_at_eps_and_epsilon_at_delta() {
    let out = htdp(&["srs", "--N", "2", "--n", "1", "--mt", "0", "--Mt", "2", "--eps", "0"]);
    let v = stdout_json(&out);
    assert_valid("srs.schema.json", &v);
    assert_eq!(v["delta"].as_f64().unwrap(), 0.5);

    let out = htdp(&[
        "srs", "--N", "8", "--n", "2", "--mt", "2", "--Mt", "6", "--delta", "0.05",
    ]);
    let v = stdout_json(&out);
    assert_valid("srs.schema.json", &v);
    let eps = v["epsilon"].as_f64().unwrap();
    assert!(eps > 0.0 && eps.is_finite());
}

#[test]
fn profile_five_point_grid() {
    let out = htdp(&[
        "profile",
        "--design",
        &fixture("design_srs21.json"),
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0",
        "--eps-grid",
        "0:2:0.5",
    ]);
    let v = stdout_json(&out);
    assert_valid("profile.schema.json", &v);
    assert_eq!(v["b"].as_f64().unwrap(), 0.0);
    let points = v["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    let eps: Vec<f64> = points.iter().map(|p| p["eps"].as_f64().unwrap()).collect();
    assert_eq!(eps, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    let deltas: Vec<f64> = points
        .iter()
        .map(|p| p["delta"].as_f64().unwrap())
        .collect();
    for w in deltas.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "profile must be non-increasing");
    }
    // Half of x' sits on an atom x never emits, so delta floors at 0.5.
    assert_eq!(deltas[0], 0.5);
    assert_eq!(points[0]["witness"]["i"].as_u64().unwrap(), 0);
}

#[test]
fn profile_csv_table() {
    let out = htdp(&[
        "profile",
        "--design",
        &fixture("design_srs21.json"),
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0",
        "--eps-grid",
        "0:2:0.5",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "eps,delta,witness_i");
    assert!(lines[1].starts_with("0,0.5,"));
}

#[test]
fn calibrate_census_meets_target() {
    let out = htdp(&[
        "calibrate",
        "--design",
        &fixture("design_census2.json"),
        "--pairs",
        &fixture("pairs_census2.json"),
        "--eps",
        "1.0",
        "--delta",
        "1e-3",
    ]);
    let v = stdout_json(&out);
    assert_valid("calibrate.schema.json", &v);
    assert!(v["b"].as_f64().unwrap() > 0.0);
    assert!(v["delta_at_b"].as_f64().unwrap() <= 1e-3);
    assert_eq!(v["monotone"], true);
}

#[test]
fn moments_srs32() {
    let out = htdp(&[
        "moments",
        "--design",
        &fixture("design_srs32.json"),
        "--data",
        &fixture("dataset_srs32.json"),
        "--unit",
        "0",
    ]);
    let v = stdout_json(&out);
    assert_valid("moments.schema.json", &v);
    assert!((v["t_minus_i_given_i"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!(v["var_given_i"].as_f64().unwrap() < 1e-12);
}

#[test]
fn audit_census_at_zero_crossing() {
    let out = htdp(&[
        "audit",
        "--design",
        &fixture("design_census2.json"),
        "--pairs",
        &fixture("pairs_census2.json"),
        "--b",
        "1.0",
        "--eps",
        "1.0",
        "--trials",
        "20000",
        "--seed",
        "42",
    ]);
    let v = stdout_json(&out);
    assert_valid("audit.schema.json", &v);
    let delta_hat = v["delta_hat"].as_f64().unwrap();
    let se = v["se"].as_f64().unwrap();
    assert!(delta_hat <= 3.0 * se + 1e-12);
}

#[test]
fn output_does_not_depend_on_jobs() {
    let profile_args = [
        "profile",
        "--design",
        &fixture("design_srs21.json"),
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0.5",
        "--eps-grid",
        "0:3:0.25",
    ];
    let one = htdp(&[&profile_args[..], &["--jobs", "1"]].concat());
    let four = htdp(&[&profile_args[..], &["--jobs", "4"]].concat());
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);

    let audit_args = [
        "audit",
        "--design",
        &fixture("design_census2.json"),
        "--pairs",
        &fixture("pairs_census2.json"),
        "--b",
        "0.7",
        "--eps",
        "0.3",
        "--trials",
        "200000",
        "--seed",
        "7",
    ];
    let one = htdp(&[&audit_args[..], &["--jobs", "1"]].concat());
    let four = htdp(&[&audit_args[..], &["--jobs", "4"]].concat());
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn missing_file_is_a_clean_error() {
    let out = htdp(&[
        "profile",
        "--design",
        "/nonexistent/design.json",
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0",
        "--eps-grid",
        "0:1:0.5",
    ]);
    let v = stderr_json(&out);
    assert_valid("error.schema.json", &v);
    assert_eq!(v["error"]["kind"], "file_not_found");
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_design_is_a_schema_violation() {
    let dir = std::env::temp_dir().join("htdp-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad_design.json");
    std::fs::write(&bad, "{\"type\":\"explicit\"}").unwrap();
    let out = htdp(&[
        "profile",
        "--design",
        bad.to_str().unwrap(),
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0",
        "--eps-grid",
        "0:1:0.5",
    ]);
    let v = stderr_json(&out);
    assert_valid("error.schema.json", &v);
    assert_eq!(v["error"]["kind"], "schema_violation");
}

#[test]
fn usage_errors_exit_2() {
    let out = htdp(&["frobnicate"]);
    let v = stderr_json(&out);
    assert_valid("error.schema.json", &v);
    assert_eq!(v["error"]["kind"], "usage");

    // srs needs exactly one of --query/--eps/--delta.
    let out = htdp(&["srs", "--N", "4", "--n", "1", "--mt", "1", "--Mt", "3"]);
    let v = stderr_json(&out);
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn bad_grid_is_rejected() {
    let out = htdp(&[
        "profile",
        "--design",
        &fixture("design_srs21.json"),
        "--pairs",
        &fixture("pairs_srs21.json"),
        "--b",
        "0",
        "--eps-grid",
        "0:2",
    ]);
    let v = stderr_json(&out);
    assert_eq!(v["error"]["kind"], "bad_grid");
}

#[test]
fn invalid_domain_bounds_exit_2() {
    let out = htdp(&[
        "srs", "--N", "4", "--n", "1", "--mt", "3", "--Mt", "3", "--query", "eps0",
    ]);
    let v = stderr_json(&out);
    assert_valid("error.schema.json", &v);
    assert_eq!(v["error"]["kind"], "invalid_bounds");
}
