use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tsgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsgeo")).args(args).env_remove("TSGEO_QUAD_TOL").output().unwrap()
}

fn tsgeo_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsgeo")).args(args).env(key, value).output().unwrap()
}

fn schema() -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/output.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn ok_json(args: &[&str]) -> Value {
    let out = tsgeo(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let validator = schema();
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{args:?}: {errors:?}");
    doc
}

const GTS: [&str; 10] = ["--model", "gts", "--a", "0.5", "--c", "1", "--lp", "2", "--lm", "3"];
const CTS: [&str; 10] = ["--model", "cts", "--a", "0.5", "--c", "1", "--lp", "2", "--lm", "3"];

fn with<'a>(head: &[&'a str], model: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(model).chain(tail).copied().collect()
}

#[test]
fn divergence_oracle_passes_and_validates() {
    let doc = ok_json(&with(&["divergence"], &GTS, &["--new-lp", "1.5", "--new-lm", "2.5", "--alpha", "-1", "--oracle"]));
    assert_eq!(doc["result"]["oracle"]["pass"], Value::Bool(true));
    let doc = ok_json(&with(&["divergence"], &CTS, &["--new-lp", "2", "--new-lm", "3", "--alpha", "0"]));
    assert_eq!(doc["result"]["value"].as_f64(), Some(0.0));
}

#[test]
fn geometry_outputs_validate() {
    let doc = ok_json(&with(&["geometry"], &GTS, &["--alpha", "0"]));
    assert_eq!(doc["result"]["alpha_connection"], doc["result"]["levi_civita"]);
    let doc = ok_json(&["geometry", "--model", "rdts", "--a", "0.6", "--c", "1", "--lp", "1", "--lm", "1", "--alpha", "0.4", "--oracle"]);
    assert_eq!(doc["result"]["oracle"]["pass"], Value::Bool(true));
}

#[test]
fn prior_reference_value() {
    let doc = ok_json(&["prior", "--model", "gts", "--a", "0.5", "--c", "1", "--lp", "1", "--lm", "1", "--loglik", "-10"]);
    let j = doc["result"]["jeffreys"].as_f64().unwrap();
    assert!((j - 0.886_226_925_452_758).abs() < 1e-14);
    let pen = doc["result"]["penalized_loglik"].as_f64().unwrap();
    assert!((pen + 10.120_782_237_635_245).abs() < 1e-12);
}

#[test]
fn ansatz_check_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lb.csv");
    let doc = ok_json(&[
        "ansatz-check", "--model", "gts", "--a", "1.5", "--c", "1", "--kind", "phi4", "--k", "0.2", "--l", "0.3", "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(doc["result"]["pass"], Value::Bool(true));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda_plus,lambda_minus,delta_phi"));
    assert_eq!(lines.count(), 81);
}

#[test]
fn inadmissible_ansatz_is_rejected_unless_allowed() {
    let base = ["ansatz-check", "--model", "gts", "--a", "0.5", "--c", "1", "--kind", "phi1", "--k", "-0.75"];
    assert_eq!(tsgeo(&base).status.code(), Some(2));
    let doc = ok_json(&with(&base, &[], &["--allow-inadmissible"]));
    assert_eq!(doc["result"]["admissible"], Value::Bool(false));
    assert!(doc["result"]["max_delta_phi"].as_f64().unwrap() > 0.0);
}

#[test]
fn density_writes_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("density.csv");
    let doc = ok_json(&with(&["density"], &CTS, &["--n", "1024", "--csv", csv.to_str().unwrap()]));
    assert!((doc["result"]["mass"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x,value\n"));
    assert_eq!(text.lines().count(), 1025);
}

#[test]
fn fit_from_file_and_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("xs.txt");
    let drawn = tsgeo::charfn::sample(&tsgeo::params::ProcessSpec::cts(
        tsgeo::params::CtsParams { a: 0.5, c: 1.0, lambda_plus: 2.0, lambda_minus: 3.0, m: 0.0 },
        1.0,
    )
    .unwrap(), 300, 9)
    .unwrap();
    let text: String = drawn.iter().map(|x| format!("{x}\n")).collect();
    std::fs::write(&input, format!("# samples\n{text}")).unwrap();
    let from_file = ok_json(&with(&["fit"], &CTS, &["--input", input.to_str().unwrap()]));
    let from_seed = ok_json(&with(&["fit"], &CTS, &["--n", "300", "--seed", "9"]));
    assert_eq!(from_file["result"], from_seed["result"]);
    assert!(from_file["manifest"]["seed"].is_null());
    assert_eq!(from_seed["manifest"]["seed"].as_u64(), Some(9));
}

#[test]
fn stochastic_commands_are_byte_identical() {
    let fit = with(&["fit"], &CTS, &["--n", "400", "--seed", "3", "--penalized"]);
    assert_eq!(tsgeo(&fit).stdout, tsgeo(&fit).stdout);
    let bias = with(&["bias-study"], &CTS, &["--n", "150", "--seeds", "3", "--seed0", "42"]);
    let first = tsgeo(&bias);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, tsgeo(&bias).stdout);
    let doc: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert!(schema().is_valid(&doc));
}

#[test]
fn exit_codes() {
    // Mixed decay -2 + 2·0.5 < 0 on the upper tail.
    let out = tsgeo(&with(&["divergence"], &GTS, &["--new-lp", "0.5", "--new-lm", "3", "--alpha", "3"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(out.stdout.is_empty());
    assert_eq!(tsgeo(&["prior", "--model", "gts", "--a", "1", "--c", "1", "--lp", "1", "--lm", "1"]).status.code(), Some(2));
    assert_eq!(tsgeo(&["prior", "--model", "gts", "--a", "0.5", "--lp", "1", "--lm", "1"]).status.code(), Some(2));
    assert_eq!(tsgeo(&["prior", "--model", "weird"]).status.code(), Some(2));
    assert_eq!(tsgeo(&["density", "--model", "rdts", "--a", "0.5", "--c", "1", "--lp", "2", "--lm", "3"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    assert_eq!(tsgeo(&with(&["density"], &CTS, &["--csv", missing.to_str().unwrap()])).status.code(), Some(4));
    let absent = dir.path().join("absent.txt");
    assert_eq!(tsgeo(&with(&["fit"], &CTS, &["--input", absent.to_str().unwrap()])).status.code(), Some(4));
}

#[test]
fn quadrature_tolerance_from_environment() {
    let args = with(&["divergence"], &GTS, &["--new-lp", "1.5", "--new-lm", "2.5", "--alpha", "0.5", "--oracle"]);
    assert_eq!(tsgeo_env(&args, "TSGEO_QUAD_TOL", "abc").status.code(), Some(2));
    assert_eq!(tsgeo_env(&args, "TSGEO_QUAD_TOL", "-1").status.code(), Some(2));
    let loose = tsgeo_env(&args, "TSGEO_QUAD_TOL", "1e-6");
    assert_eq!(loose.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&loose.stdout).unwrap();
    assert_eq!(doc["result"]["oracle"]["pass"], Value::Bool(true));
}

#[test]
fn timing_and_pretty() {
    let args = with(&["--timing", "prior"], &GTS, &[]);
    let doc = ok_json(&args);
    assert!(doc["manifest"]["wall_time_s"].as_f64().unwrap() >= 0.0);
    let out = tsgeo(&with(&["prior"], &GTS, &["--pretty"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("result.jeffreys ")));
    assert!(text.lines().any(|l| l.starts_with("manifest.command ")));
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(tsgeo(&["--help"]).status.code(), Some(0));
    let out = tsgeo(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}
