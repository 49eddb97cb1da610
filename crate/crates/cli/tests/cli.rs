use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use uftrl::{AlgorithmConfig, Family, LearningRateSchedule};

fn uftrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uftrl")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const TINY: &str = "\
+1 1:0.5 4:1
-1 2:1 3:0.25
+1 1:1 7:2
-1 3:1 4:-1 9:0.5
+1 2:0.3 7:1
";

#[test]
fn rda_without_penalty_keeps_every_touched_feature() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "tiny.svm", TINY);
    let out = uftrl(&["train", "--family", "rda", "--lambda", "0", "--gamma", "1", "--data", &data]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = json_stdout(&out);

    let touched: BTreeSet<&str> =
        TINY.lines().flat_map(|l| l.split_whitespace().skip(1)).map(|t| t.split(':').next().unwrap()).collect();
    assert_eq!(metrics["nnz"].as_u64().unwrap() as usize, touched.len());
    assert_eq!(metrics["density"].as_f64().unwrap(), 1.0);
    assert_eq!(metrics["T"], 5);
}

#[test]
fn implicit_squared_stream_stays_below_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "scalar.svm", &"+1 0:1\n".repeat(50));
    for gamma in ["0.01", "0.1", "1", "10", "100"] {
        let out_dir = dir.path().join(format!("run{gamma}"));
        let out = uftrl(&[
            "train", "--family", "ftprl", "--implicit", "--loss", "squared", "--target", "3", "--rate", "global",
            "--gamma", gamma, "--data", &data, "--out", out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let weights = fs::read_to_string(out_dir.join("weights.tsv")).unwrap();
        let (coord, value) = weights.trim().split_once('\t').unwrap();
        let value: f64 = value.parse().unwrap();
        assert_eq!(coord, "0");
        assert!(value > 0.0 && value <= 3.0, "gamma {gamma}: {value}");
    }
}

#[test]
fn seeded_training_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "tiny.svm", TINY);
    let mut metrics = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = uftrl(&[
            "train", "--family", "fobos", "--lambda", "0.01", "--seed", "7", "--data", &data, "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        metrics.push(fs::read(out_dir.join("metrics.json")).unwrap());
        let checkpoint = fs::read_to_string(out_dir.join("checkpoint.txt")).unwrap();
        assert!(checkpoint.starts_with("uftrl-checkpoint=1\tfamily=fobos"));
    }
    assert_eq!(metrics[0], metrics[1]);
}

#[test]
fn manifest_records_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "tiny.svm", TINY);
    let out_dir = dir.path().join("run");
    let out = uftrl(&["train", "--data", &data, "--unit-scale", "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(out_dir.join("manifest.json")).unwrap();
    let manifest: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(manifest["command"], "train");
    let config: AlgorithmConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    assert_eq!(config, AlgorithmConfig::new(Family::Ftprl, LearningRateSchedule::adaptive(1.0)));
    assert_eq!(manifest["dataset"]["source"], "file");
    assert_eq!(manifest["dataset"]["unit_scaled"], true);
    assert_eq!(manifest["seeds"], serde_json::json!([3]));
}

#[test]
fn single_cell_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "tiny.svm", TINY);
    let out = uftrl(&[
        "sweep", "--family", "rda", "--lambda", "0.01", "--gamma", "1", "--shuffles", "2", "--data", &data,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "family,lambda,gamma,auc,density,online_loss");
    assert!(lines[1].starts_with("rda,0.01,1,"));
}

#[test]
fn empty_lambda_grid_is_a_usage_error() {
    let out = uftrl(&["sweep", "--lambda", ""]);
    assert_eq!(code(&out), 2);
    let out = uftrl(&["sweep", "--lambda"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn default_sweep_leaves_fobos_dominated() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = uftrl(&["sweep", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let rows: Vec<(String, f64, f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[1].parse().unwrap(), c[3].parse().unwrap(), c[4].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 12);
    for (family, lambda, auc, density) in rows.iter().filter(|r| r.0 == "fobos") {
        let rivals: Vec<_> = rows.iter().filter(|r| r.0 != *family && r.1 == *lambda).collect();
        assert_eq!(rivals.len(), 2);
        let dominates_all = rivals.iter().all(|r| *auc > r.2 && *density < r.3);
        assert!(!dominates_all, "fobos at lambda {lambda} dominates {rivals:?}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dataset"]["source"], "synthetic");
    assert_eq!(manifest["params"]["gammas"].as_array().unwrap().len(), 12);
}

#[test]
fn gradient_descent_suite_passes() {
    let out = uftrl(&["equiv-check", "cor2", "--T", "1000", "--dim", "10", "--seeds", "20"]);
    assert_eq!(code(&out), 0);
    let report = json_stdout(&out);
    assert_eq!(report["pass"], true);
    assert!(report["max_discrepancy"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["T"], 1000);
}

#[test]
fn revisionist_and_implicit_suites_pass() {
    let out = uftrl(&["equiv-check", "cor4"]);
    assert_eq!(code(&out), 0);
    let out = uftrl(&["equiv-check", "thm2", "--psi", "l1"]);
    assert_eq!(code(&out), 0);
    let report = json_stdout(&out);
    assert!(report["max_discrepancy"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn unknown_theorem_is_a_usage_error() {
    assert_eq!(code(&uftrl(&["equiv-check", "cor9"])), 2);
}

#[test]
fn impossible_tolerance_fails_the_check() {
    let out = uftrl(&["equiv-check", "cor2", "--seeds", "2", "--tol", "1e-300"]);
    assert_eq!(code(&out), 5);
    assert_eq!(json_stdout(&out)["pass"], false);
}

#[test]
fn ftprl_regret_within_closed_form_bound() {
    let out = uftrl(&["regret-check", "--family", "ftprl", "--D", "2", "--G", "1", "--T", "10000"]);
    assert_eq!(code(&out), 0);
    let report = json_stdout(&out);
    let bound = 2.0 * 20000f64.sqrt();
    assert!((report["bound"]["total"].as_f64().unwrap() - bound).abs() < 1e-9);
    assert!(report["realized"].as_f64().unwrap() <= bound);
}

#[test]
fn rda_and_single_round_regret_pass() {
    let out = uftrl(&["regret-check", "--family", "rda", "--D", "2", "--G", "1", "--T", "10000"]);
    assert_eq!(code(&out), 0);
    let report = json_stdout(&out);
    assert!(report["realized"].as_f64().unwrap() <= report["bound"]["total"].as_f64().unwrap());

    let out = uftrl(&["regret-check", "--T", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(json_stdout(&out)["pass"], true);
}

#[test]
fn error_classes_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.svm", "+1 1:0.5\n+1 2:x\n");
    let out = uftrl(&["train", "--data", &bad]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    assert_eq!(code(&uftrl(&["train", "--data", dir.path().join("missing.svm").to_str().unwrap()])), 3);
    assert_eq!(code(&uftrl(&["train", "--gamma", "-1", "--data", &bad])), 2);
    assert_eq!(code(&uftrl(&["train", "--family", "sgd"])), 2);

    let huge = write(dir.path(), "huge.svm", "+1 0:1e308\n");
    let out = uftrl(&["train", "--loss", "squared", "--target", "1e308", "--rate", "global", "--data", &huge]);
    assert_eq!(code(&out), 4);
}

#[test]
fn thread_cap_is_validated() {
    let run = |value: &str| {
        Command::new(env!("CARGO_BIN_EXE_uftrl"))
            .args(["equiv-check", "cor4", "--seeds", "2"])
            .env("UFTRL_THREADS", value)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("1")), 0);
    assert_eq!(code(&run("many")), 2);
}
