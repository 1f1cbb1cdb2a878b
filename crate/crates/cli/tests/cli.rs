use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use causal_kit::dsl::parse_scm;
use causal_kit::exact::ate_exact;
use causal_kit::fixtures;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn model(name: &str) -> String {
    root().join("models").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_causal-kit"))
        .args(args)
        .env_remove("CAUSAL_KIT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn assert_schema(schema: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{schema}.schema.json"));
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:#?}\n{instance:#}");
}

#[test]
fn shipped_models_match_the_fixtures() {
    let pairs = [
        ("vaccine_toy.scm.txt", fixtures::VACCINE_TOY),
        ("confounded_assignment.scm.txt", fixtures::CONFOUNDED_ASSIGNMENT),
        ("marker_effect.scm.txt", fixtures::MARKER_EFFECT),
        ("two_habits.scm.txt", fixtures::TWO_HABITS),
    ];
    for (file, src) in pairs {
        let text = fs::read_to_string(model(file)).unwrap();
        assert_eq!(parse_scm(&text).unwrap(), parse_scm(src).unwrap(), "{file}");
    }
    let iv = parse_scm(&fs::read_to_string(model("iv_linear.scm.txt")).unwrap()).unwrap();
    assert_eq!(iv, fixtures::iv_linear());
}

#[test]
fn validate_ok_and_errors() {
    let o = run(&["validate", &model("vaccine_toy.scm.txt")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "OK");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scm.txt");
    fs::write(&bad, "var a ~ normal(0 1);\nvar b := c;\n").unwrap();
    let bad = bad.display().to_string();
    let o = run(&["validate", &bad]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&format!("{bad}:1:18: syntax error")), "{err}");
    assert!(err.contains("2:10: unknown-symbol error"), "{err}");

    let o = run(&["validate", &bad, "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_schema("validate", &v);
    assert_eq!(v["errors"].as_array().unwrap().len(), 2);

    let v = json(&run(&["validate", &model("vaccine_toy.scm.txt"), "--format", "json"]));
    assert_schema("validate", &v);
    assert_eq!(v["nodes"], serde_json::json!(["x", "a", "y"]));
}

#[test]
fn ate_matches_the_exact_oracle() {
    let v = json(&run(&["ate", &model("vaccine_toy.scm.txt"), "--action", "a", "--outcome", "y"]));
    assert_schema("ate", &v);
    let oracle = ate_exact(&fixtures::vaccine_toy(), "a", "y", 1.0, 0.0, &Default::default()).unwrap();
    assert!((v["estimate"].as_f64().unwrap() - oracle).abs() < 1e-12);
    assert!((v["estimate"].as_f64().unwrap() - 0.30).abs() < 1e-12);
    assert!((v["naive_difference"].as_f64().unwrap() - 0.60).abs() < 1e-12);

    // within x=1: p(y|do(a=1),x=1) - p(y|do(a=0),x=1) = 0.9 - 0.6
    let v = json(&run(&[
        "ate",
        &model("vaccine_toy.scm.txt"),
        "--action",
        "a",
        "--outcome",
        "y",
        "--given",
        "x=1",
    ]));
    assert_schema("ate", &v);
    assert!((v["estimate"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert!(v["naive_difference"].is_null());
}

#[test]
fn exact_query_json_and_csv() {
    let v = json(&run(&["exact", &model("vaccine_toy.scm.txt"), "--target", "y", "--do", "a=1"]));
    assert_schema("exact", &v);
    assert!((v["table"]["1"].as_f64().unwrap() - 0.65).abs() < 1e-12);

    let v = json(&run(&["exact", &model("vaccine_toy.scm.txt"), "--target", "x,a", "--given", "y=1"]));
    assert_schema("exact", &v);
    let o = run(&["exact", &model("vaccine_toy.scm.txt"), "--target", "y", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("y,prob\n0,"));

    let o = run(&["exact", &model("vaccine_toy.scm.txt"), "--target", "nope"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sample_is_reproducible_and_seedable() {
    let m = model("vaccine_toy.scm.txt");
    let a = run(&["sample", &m, "-n", "50"]);
    let b = run(&["sample", &m, "-n", "50", "--seed", "42"]);
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).contains("seed=42"));
    let c = run(&["sample", &m, "-n", "50", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);

    let from_env = Command::new(env!("CARGO_BIN_EXE_causal-kit"))
        .args(["sample", &m, "-n", "50"])
        .env("CAUSAL_KIT_SEED", "43")
        .output()
        .unwrap();
    assert_eq!(from_env.stdout, c.stdout);

    let v = json(&run(&["sample", &m, "-n", "5", "--format", "json", "--do", "a=1"]));
    assert_schema("sample", &v);
    let col = v["columns"].as_array().unwrap().iter().position(|c| c == "a").unwrap();
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r[col] == 1.0));

    let o = run(&["sample", &m, "-n", "20", "--given", "y=1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let body: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(body.len(), 20);
    assert!(body.iter().all(|l| l.ends_with(",1")));
}

fn sample_to(dir: &Path, model_file: &str, n: &str) -> String {
    let path = dir.join(format!("{model_file}.csv")).display().to_string();
    let o = run(&["sample", &model(model_file), "-n", n, "-o", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    path
}

#[test]
fn every_estimator_emits_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let vaccine = sample_to(dir.path(), "vaccine_toy.scm.txt", "20000");
    let iv = sample_to(dir.path(), "iv_linear.scm.txt", "50000");
    let base = ["--action", "a", "--outcome", "y"];
    let cases: Vec<(&str, &str, Vec<&str>)> = vec![
        ("regression", &vaccine, vec!["--covariates", "x"]),
        ("naive", &vaccine, vec![]),
        ("ols", &vaccine, vec!["--covariates", "x"]),
        ("ipw", &vaccine, vec!["--covariates", "x"]),
        ("ipw", &vaccine, vec!["--covariates", "x", "--propensity", "logistic"]),
        ("dr", &vaccine, vec!["--covariates", "x", "--bootstrap", "20"]),
        ("matching", &vaccine, vec!["--covariates", "x", "--selection", "round-robin"]),
        ("iv", &iv, vec!["--instrument", "z"]),
        ("dml", &iv, vec!["--covariates", "x"]),
    ];
    for (method, data, extra) in cases {
        let mut args = vec!["estimate", method, data];
        args.extend(base);
        args.extend(extra);
        let v = json(&run(&args));
        assert_schema("estimate", &v);
        assert_eq!(v["method"], method);
        let est = v["estimate"].as_f64().unwrap();
        let expected = match method {
            "naive" => 0.6,
            "iv" | "dml" => 2.0,
            _ => 0.3,
        };
        assert!((est - expected).abs() < 0.05, "{method}: {est}");
    }
}

#[test]
fn did_and_rdd_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,y_pre,y_post,x,y\n");
    // treated change 3, control change 1; y jumps by 2 at x = 0 on a line
    for i in 0..40 {
        let a = i % 2;
        let x = f64::from(i - 20) / 10.0;
        let y = 1.0 + 0.5 * x + if x >= 0.0 { 2.0 } else { 0.0 };
        csv.push_str(&format!("{a},{},{},{x},{y}\n", i, i + 1 + 2 * a));
    }
    let path = dir.path().join("d.csv");
    fs::write(&path, csv).unwrap();
    let p = path.display().to_string();

    let v = json(&run(&["estimate", "did", &p, "--action", "a", "--pre", "y_pre", "--outcome", "y_post"]));
    assert_schema("estimate", &v);
    assert!((v["estimate"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let v = json(&run(&["estimate", "rdd", &p, "--running", "x", "--outcome", "y", "--bandwidth", "1"]));
    assert_schema("estimate", &v);
    assert!((v["estimate"].as_f64().unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let vaccine = sample_to(dir.path(), "vaccine_toy.scm.txt", "100");

    let o = run(&["estimate", "ipv", &vaccine, "--action", "a", "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("similar value exists: 'ipw'"), "{}", stderr(&o));

    let o = run(&["estimate", "ipw", &vaccine, "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--action"));

    let o = run(&["estimate", "ipw", &vaccine, "--action", "a", "--outcome", "y", "--covariatez", "x"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["estimate", "ipw", &vaccine, "--action", "a", "--outcome", "nope"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope"));

    let missing = dir.path().join("missing.csv").display().to_string();
    let o = run(&["estimate", "naive", &missing, "--action", "a", "--outcome", "y"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&missing));

    let o = run(&["ate", &model("vaccine_toy.scm.txt"), "--action", "a", "--outcome", "y", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn trial_report_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let args = [
        "trial",
        &model("vaccine_toy.scm.txt"),
        "--steps",
        "300",
        "--covariates",
        "x",
        "--schedule-eps",
        "geom:1,0.99,0.1",
        "--schedule-beta",
        "const:0.1",
        "--ema",
        "0.9",
        "--policy",
        "conditional",
        "--log",
        log.to_str().unwrap(),
    ];
    let first = run(&args);
    let v = json(&first);
    assert_schema("trial", &v);
    assert_eq!(v["steps"], 300);
    assert_eq!(v["update_mode"]["kind"], "ema");
    let text = fs::read_to_string(&log).unwrap();
    assert!(text.starts_with("t,e,a,y,x\n"));
    assert_eq!(text.lines().count(), 301);
    assert_eq!(first.stdout, run(&args).stdout);

    let o = run(&["trial", &model("vaccine_toy.scm.txt"), "--steps", "10", "--schedule-eps", "const:2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["trial", &model("vaccine_toy.scm.txt"), "--steps", "10", "--schedule-eps", "cosine:1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn repro_runs_registered_experiments() {
    let o = run(&["repro", "ipw-vs-naive"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("PASS ipw-vs-naive"));
    assert!(out.contains("PASS IPW"));
    assert!(out.contains("PASS naive difference"));

    let o = run(&["repro", "iv-linear", "--format", "json"]);
    let v = json(&o);
    assert_schema("repro", &v);
    assert_eq!(v["experiments"][0]["passed"], true);

    // the documented failure is reported, but does not fail the command
    let o = run(&["repro", "model-equivalence"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("FAIL model 1: Var[v - v']"));
    assert!(stdout(&o).contains("known issue"));

    let o = run(&["repro", "no-such"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ipw-vs-naive"));

    let o = run(&["repro", "--list"]);
    assert_eq!(stdout(&o).lines().count(), 13);
}

#[test]
fn repro_output_is_byte_identical_across_runs() {
    let a = run(&["repro", "explore-unbiased", "--format", "csv"]);
    let b = run(&["repro", "explore-unbiased", "--format", "csv"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
