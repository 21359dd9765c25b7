use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BETA0: [f64; 5] = [0.2, 0.2, 0.1, 0.1, 0.1];
const FEATURES: &str = "x1,x2,x3,x4,x5";

fn mcox(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcox")).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn validator(schema_name: &str) -> jsonschema::Validator {
    let file = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{schema_name}.json"));
    jsonschema::validator_for(&read_json(&file)).unwrap()
}

fn assert_valid(instance: &Value, schema_name: &str) {
    let validator = validator(schema_name);
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:#?}");
    assert_eq!(instance["schema"], schema_name);
}

/// Writes one simulated dataset through `mcox simulate --write-data` and
/// returns the CSV path.
fn simulated_csv(dir: &TempDir, n: usize, covariate: &str, seed: u64) -> PathBuf {
    let csv = dir.path().join(format!("{covariate}-{n}-{seed}.csv"));
    let out = dir.path().join(format!("sim-{covariate}-{n}-{seed}"));
    let n = n.to_string();
    let seed = seed.to_string();
    let res = mcox(&[
        "--out", path_str(&out), "simulate", "--n", &n, "--covariate", covariate, "--seed", &seed,
        "--reps", "2", "--r", "200", "--estimators", "uni", "--write-data", path_str(&csv),
    ]);
    assert!(res.status.success(), "{}", stderr(&res));
    csv
}

#[test]
fn fit_recovers_simulation_coefficients() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 10_000, "ti", 2024);
    let out = dir.path().join("fit");
    let res = mcox(&["--out", path_str(&out), "fit", "--data", path_str(&csv), "--features", FEATURES]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let json = read_json(&out.join("result.json"));
    assert_valid(&json, "fit_result.v1");
    assert_eq!(json["converged"], true);
    let mut broken = json.clone();
    broken.as_object_mut().unwrap().remove("loglik");
    assert!(!validator("fit_result.v1").is_valid(&broken));
    for (c, b0) in json["coefficients"].as_array().unwrap().iter().zip(BETA0) {
        let est = c["estimate"].as_f64().unwrap();
        let se = c["std_error"].as_f64().unwrap();
        assert!((est - b0).abs() <= 3.0 * se, "{}: {est} ± {se}", c["name"]);
        assert!(c["lower"].as_f64().unwrap() < est && est < c["upper"].as_f64().unwrap());
    }
}

#[test]
fn simulate_with_two_replications_writes_all_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sim");
    let res = mcox(&[
        "--out", path_str(&out), "simulate", "--n", "4000", "--reps", "2", "--r", "200,400",
        "--estimators", "whole,uni,mcox-opt,mcox-app,oses",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let json = read_json(&out.join("result.json"));
    assert_valid(&json, "sim_summary.v1");
    assert_eq!(json["reports"].as_array().unwrap().len(), 10);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(fs::read_to_string(out.join("plots.gp")).unwrap().contains("report.csv"));
}

#[test]
fn simulate_rejects_a_single_replication() {
    let dir = TempDir::new().unwrap();
    let res = mcox(&["--out", path_str(dir.path()), "simulate", "--n", "2000", "--reps", "1", "--r", "100"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).starts_with("InvalidArgument"), "{}", stderr(&res));
}

#[test]
fn empty_csv_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [("blank.csv", ""), ("header.csv", "time,status,x1\n")] {
        let file = dir.path().join(name);
        fs::write(&file, text).unwrap();
        let res = mcox(&["--out", path_str(dir.path()), "fit", "--data", path_str(&file), "--features", "x1"]);
        assert_eq!(res.status.code(), Some(1), "{name}");
        assert!(stderr(&res).contains("EmptyDataset"), "{name}: {}", stderr(&res));
        assert!(!dir.path().join("result.json").exists());
    }
}

#[test]
fn missing_column_and_bad_values_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("d.csv");
    fs::write(&file, "time,status,x1\n1,1,0.5\n2,0,0.1\n").unwrap();
    let res = mcox(&["fit", "--data", path_str(&file), "--features", "x9"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).starts_with("MissingColumn"));

    fs::write(&file, "time,status,x1\n1,1,0.5\n-2,0,0.1\n").unwrap();
    let res = mcox(&["fit", "--data", path_str(&file), "--features", "x1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).starts_with("NegativeTime"));

    let res = mcox(&["fit", "--data", path_str(&dir.path().join("nope.csv")), "--features", "x1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).starts_with("Io"));
}

#[test]
fn iteration_cap_exits_two_with_partial_result() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 5000, "ti", 7);
    let out = dir.path().join("fit");
    let res = mcox(&["--out", path_str(&out), "fit", "--data", path_str(&csv), "--features", FEATURES, "--max-iter", "1"]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr(&res));
    assert!(stderr(&res).contains("NotConverged"));
    let json = read_json(&out.join("result.json"));
    assert_valid(&json, "fit_result.v1");
    assert_eq!(json["converged"], false);
    assert_eq!(json["iterations"], 1);
}

#[test]
fn usage_errors_exit_one() {
    let res = mcox(&["frobnicate"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(stderr(&res).contains("Usage"));
    assert_eq!(mcox(&[]).status.code(), Some(1));
    assert_eq!(mcox(&["mcox", "--data", "x.csv", "--features", "x1"]).status.code(), Some(1));
    assert_eq!(mcox(&["--help"]).status.code(), Some(0));
    assert_eq!(mcox(&["--version"]).status.code(), Some(0));
}

fn without_timings(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timings_ms");
    v
}

#[test]
fn optimal_moment_shrinks_standard_errors_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 20_000, "ti", 31);
    let run = |tag: &str, threads: &str| {
        let out = dir.path().join(tag);
        let res = mcox(&[
            "--out", path_str(&out), "--threads", threads, "mcox", "--data", path_str(&csv), "--features",
            FEATURES, "--r", "1000", "--seed", "5", "--moment", "opt", "--with-oses",
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
        out.join("result.json")
    };
    let first = run("a", "1");
    let second = run("b", "3");
    let json = read_json(&first);
    assert_valid(&json, "mcox_result.v1");
    let ase = json["ase"].as_f64().unwrap();
    let uni_ase = json["uni_ase"].as_f64().unwrap();
    assert!(ase < uni_ase, "ASE {ase} vs UNI {uni_ase}");
    assert_eq!(json["fallback"], false);
    assert!(json["alpha"].is_number());
    assert_eq!(json["beta_oses"].as_array().unwrap().len(), 5);

    let a = serde_json::to_string(&without_timings(read_json(&first))).unwrap();
    let b = serde_json::to_string(&without_timings(read_json(&second))).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_rate_matches_whole_data_fit_with_warning() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 3000, "ti", 13);
    let fit_out = dir.path().join("fit");
    let res = mcox(&["--out", path_str(&fit_out), "fit", "--data", path_str(&csv), "--features", FEATURES]);
    assert_eq!(res.status.code(), Some(0));
    let mc_out = dir.path().join("mcox");
    let res = mcox(&[
        "--out", path_str(&mc_out), "mcox", "--data", path_str(&csv), "--features", FEATURES, "--r", "3000",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    assert!(stderr(&res).contains("warning"));
    let fit = read_json(&fit_out.join("result.json"));
    let mc = read_json(&mc_out.join("result.json"));
    assert_valid(&mc, "mcox_result.v1");
    assert_eq!(mc["fallback"], true);
    assert!(!mc["warnings"].as_array().unwrap().is_empty());
    let whole: Vec<f64> = fit["coefficients"].as_array().unwrap().iter().map(|c| c["estimate"].as_f64().unwrap()).collect();
    let est: Vec<f64> = mc["beta_mcox"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(whole, est);
}

#[test]
fn linear_and_aft_moments_run_from_the_command_line() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 10_000, "ti", 3);
    let matrix = dir.path().join("m.csv");
    fs::write(&matrix, "# time,status,x1..x5\n0,1,0,0,0,0,0\n1,0,0,0,0,0,0\n0,0,1,1,0,0,0\n").unwrap();
    for moment in [format!("linear:{}", matrix.display()), "aft".to_string()] {
        let out = dir.path().join(moment.len().to_string());
        let res = mcox(&[
            "--out", path_str(&out), "mcox", "--data", path_str(&csv), "--features", FEATURES, "--r", "800",
            "--moment", &moment,
        ]);
        assert_eq!(res.status.code(), Some(0), "{moment}: {}", stderr(&res));
        let json = read_json(&out.join("result.json"));
        assert_valid(&json, "mcox_result.v1");
        assert!(json["beta_oses"].is_null());
    }
    let res = mcox(&["mcox", "--data", path_str(&csv), "--features", FEATURES, "--r", "800", "--moment", "gmm"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn time_dependent_data_round_trips_through_csv() {
    let dir = TempDir::new().unwrap();
    let csv = simulated_csv(&dir, 2000, "td", 19);
    let out = dir.path().join("fit");
    let res = mcox(&[
        "--out", path_str(&out), "fit", "--data", path_str(&csv), "--features",
        "x1,x2,x3,x4,x5,eps1,eps2,eps3,eps4,eps5", "--path", "poly-sum:1,t",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let json = read_json(&out.join("result.json"));
    assert_valid(&json, "fit_result.v1");
    assert_eq!(json["coefficients"].as_array().unwrap().len(), 5);
    assert_eq!(json["covariate_path"], "poly-sum:1,t");
}

#[test]
fn bench_reports_slopes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("bench");
    let res = mcox(&[
        "--out", path_str(&out), "bench", "--grid", "2000,4000", "--r", "200", "--repeats", "1",
        "--estimators", "whole,mcox-app", "--r-grid", "100,200",
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", stderr(&res));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("holds"));
    let json = read_json(&out.join("result.json"));
    assert_valid(&json, "bench.v1");
    assert_eq!(json["table"]["slopes"].as_array().unwrap().len(), 2);
    assert!(json["r_scaling"]["factor_per_doubling"].is_number());
    assert_eq!(fs::read_to_string(out.join("report.csv")).unwrap().lines().count(), 5);

    let res = mcox(&["--out", path_str(&out), "bench", "--grid", "2000"]);
    assert_eq!(res.status.code(), Some(1));
}
