//! End-to-end runs of the `continuum` binary.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use continuum::model::{write_checkpoint, TrainingConfig};
use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_continuum"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
  "seed": 5,
  "data": {"per_level": 30},
  "train": {"d_z": 4, "encoder_hidden": [16], "decoder_hidden": [16], "batch_size": 32, "steps": 25},
  "eval": {"n_gen": 20, "permutations": 50, "kde_points": 32}
}"#;

/// gen-data + train with the small config in a fresh directory.
fn small_run(extra_train: Option<&str>) -> TempDir {
    let tmp = TempDir::new().unwrap();
    let json = match extra_train {
        Some(t) => SMALL.replace(r#""steps": 25"#, &format!(r#""steps": 25, {t}"#)),
        None => SMALL.to_string(),
    };
    let cfg = write_config(tmp.path(), &json);
    let cfg = cfg.to_str().unwrap();
    let o = run(tmp.path(), &["--config", cfg, "gen-data"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    tmp
}

fn train(tmp: &TempDir) -> Output {
    run(tmp.path(), &["--config", "config.json", "train"])
}

#[test]
fn gen_data_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["gen-data"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = fs::read_to_string(tmp.path().join("run/data/manifest.csv")).unwrap();
    let rows: Vec<&str> = manifest.lines().skip(1).collect();
    assert_eq!(rows.len(), 5000);
    for level in 1..=5 {
        let n = rows.iter().filter(|r| r.split(',').nth(1) == Some(&level.to_string())).count();
        assert_eq!(n, 1000, "level {level}");
    }
    let test = rows.iter().filter(|r| r.ends_with(",test")).count();
    assert_eq!(test, 1000);
    assert!(tmp.path().join("run/data/images/img_04999.pgm").is_file());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("level 5: 1000"), "{stdout}");

    let again = run(tmp.path(), &["gen-data", "--out-dir", "again"]);
    assert_eq!(code(&again), 0);
    let second = fs::read_to_string(tmp.path().join("again/data/manifest.csv")).unwrap();
    assert_eq!(manifest, second);
    assert_eq!(
        fs::read(tmp.path().join("run/data/images/img_00123.pgm")).unwrap(),
        fs::read(tmp.path().join("again/data/images/img_00123.pgm")).unwrap()
    );
}

#[test]
fn invalid_data_config_exits_1() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), r#"{"data": {"levels": 1}}"#);
    let o = run(tmp.path(), &["--config", "config.json", "gen-data"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("levels"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_exits_1() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), r#"{"train": {"lambda2": 3.0}}"#);
    let o = run(tmp.path(), &["--config", "config.json", "gen-data"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("lambda2"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["--config", "nope.json", "gen-data"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn bad_usage_exits_1() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&run(tmp.path(), &["--help"])), 0);
}

#[test]
fn train_without_seed_exits_1() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&run(tmp.path(), &["gen-data"])), 0);
    let o = run(tmp.path(), &["train"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn train_without_dataset_exits_2() {
    let tmp = TempDir::new().unwrap();
    let o = run(tmp.path(), &["--seed", "1", "train"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("gen-data"), "{}", stderr(&o));
}

#[test]
fn train_writes_metrics_that_recompose() {
    let tmp = small_run(None);
    let o = train(&tmp);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let metrics = fs::read_to_string(tmp.path().join("run/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("step,recon,mmd,hsic_ind,hsic_dep,total"));
    let (l1, l2, l3) = {
        let c = TrainingConfig::preset("synthetic").unwrap();
        (c.lambda_mmd, c.lambda_ind, c.lambda_dep)
    };
    let mut n = 0;
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], i.to_string());
        let v: Vec<f64> = f[1..].iter().map(|x| x.parse().unwrap()).collect();
        let want = v[0] + l1 * v[1] + l2 * v[2] - l3 * v[3];
        assert!((v[4] - want).abs() <= 1e-12 * want.abs().max(1.0), "row {i}");
        n += 1;
    }
    assert_eq!(n, 25);
    assert!(tmp.path().join("run/checkpoint.txt").is_file());
}

#[test]
fn zero_steps_writes_header_only() {
    let tmp = small_run(None);
    let cfg = fs::read_to_string(tmp.path().join("config.json")).unwrap().replace(r#""steps": 25"#, r#""steps": 0"#);
    write_config(tmp.path(), &cfg);
    let o = train(&tmp);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let metrics = fs::read_to_string(tmp.path().join("run/metrics.csv")).unwrap();
    assert_eq!(metrics, "step,recon,mmd,hsic_ind,hsic_dep,total\n");
}

#[test]
fn divergent_training_exits_3() {
    let tmp = small_run(Some(r#""learning_rate": 1e300"#));
    let o = train(&tmp);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("training aborted at step"), "{}", stderr(&o));
}

#[test]
fn training_is_deterministic() {
    let tmp = small_run(None);
    assert_eq!(code(&train(&tmp)), 0);
    let first = fs::read(tmp.path().join("run/metrics.csv")).unwrap();
    let ckpt = fs::read(tmp.path().join("run/checkpoint.txt")).unwrap();
    assert_eq!(code(&train(&tmp)), 0);
    assert_eq!(first, fs::read(tmp.path().join("run/metrics.csv")).unwrap());
    assert_eq!(ckpt, fs::read(tmp.path().join("run/checkpoint.txt")).unwrap());
}

#[test]
fn eval_writes_artifacts_deterministically() {
    let tmp = small_run(None);
    assert_eq!(code(&train(&tmp)), 0);
    let o = run(tmp.path(), &["--config", "config.json", "eval"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let eval = tmp.path().join("run/eval");
    for f in ["scatter.csv", "kde.csv", "regression.csv", "summary.json", "scatter.svg"] {
        assert!(eval.join(f).is_file(), "{f}");
    }
    let text = fs::read_to_string(eval.join("summary.json")).unwrap();
    let summary: Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("  \""))
        .filter_map(|l| l.split('"').next())
        .collect();
    assert_eq!(
        keys,
        [
            "seed",
            "n_test",
            "d_z",
            "correlations",
            "spearman_dep",
            "max_abs_spearman_ind",
            "regression",
            "hsic_ind",
            "hsic_dep",
            "pc1",
            "kde"
        ]
    );
    assert_eq!(summary["n_test"], 30);
    assert_eq!(summary["d_z"], 4);
    assert_eq!(summary["correlations"].as_array().unwrap().len(), 4);
    assert_eq!(summary["hsic_ind"]["permutations"], 50);
    let p = summary["hsic_ind"]["p_value"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
    let regression = fs::read_to_string(eval.join("regression.csv")).unwrap();
    assert_eq!(regression.lines().count(), 1 + 3 * 20);
    assert!(fs::read_to_string(eval.join("scatter.svg")).unwrap().starts_with("<?xml"));

    let scatter = fs::read(eval.join("scatter.csv")).unwrap();
    let o = run(tmp.path(), &["--config", "config.json", "eval"]);
    assert_eq!(code(&o), 0);
    assert_eq!(text, fs::read_to_string(eval.join("summary.json")).unwrap());
    assert_eq!(scatter, fs::read(eval.join("scatter.csv")).unwrap());
}

#[test]
fn eval_rejects_latent_size_mismatch() {
    let tmp = small_run(None);
    assert_eq!(code(&train(&tmp)), 0);
    let cfg = fs::read_to_string(tmp.path().join("config.json")).unwrap().replace(r#""d_z": 4"#, r#""d_z": 6"#);
    write_config(tmp.path(), &cfg);
    let o = run(tmp.path(), &["--config", "config.json", "eval"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("d_z"), "{}", stderr(&o));
}

#[test]
fn eval_of_planted_model_has_positive_slope() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        r#"{"seed": 2, "data": {"per_level": 100}, "train": {"d_z": 4}, "eval": {"permutations": 0, "svg": false}}"#,
    );
    assert_eq!(code(&run(tmp.path(), &["--config", "config.json", "gen-data"])), 0);
    let params = common::planted_params(16, 4, 4.6, 1.3);
    let config = TrainingConfig {
        d_z: 4,
        ..TrainingConfig::default()
    };
    let ckpt = tmp.path().join("planted.txt");
    write_checkpoint(&ckpt, &config, &params).unwrap();
    let o = run(tmp.path(), &["--config", "config.json", "eval", "--checkpoint", "planted.txt"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&fs::read(tmp.path().join("run/eval/summary.json")).unwrap()).unwrap();
    assert!(summary["regression"]["slope"].as_f64().unwrap() > 0.0, "{summary}");
    assert!(summary["spearman_dep"].as_f64().unwrap() > 0.8, "{summary}");
    assert!(summary["hsic_ind"]["p_value"].is_null());
    assert!(!tmp.path().join("run/eval/scatter.svg").exists());
}

fn write_matrix(dir: &Path, name: &str, rows: &[Vec<f64>]) -> String {
    let text: String = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn json_out(o: &Output) -> Value {
    assert_eq!(code(o), 0, "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn hsic_against_constant_is_zero() {
    let tmp = TempDir::new().unwrap();
    let x = write_matrix(tmp.path(), "x.csv", &(0..20).map(|i| vec![i as f64, (i * i) as f64]).collect::<Vec<_>>());
    let y = write_matrix(tmp.path(), "y.csv", &vec![vec![3.0]; 20]);
    let v = json_out(&run(tmp.path(), &["hsic", &x, &y]));
    assert_eq!(v["statistic"], "hsic_b");
    assert!(v["value"].as_f64().unwrap().abs() < 1e-15, "{v}");
    assert!(v["p_value"].is_null());
}

#[test]
fn hsic_of_identical_samples_is_significant() {
    let tmp = TempDir::new().unwrap();
    let mut rng = continuum::seeded_rng(9, 0);
    let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![continuum::standard_normal(&mut rng)]).collect();
    let x = write_matrix(tmp.path(), "x.csv", &rows);
    let v = json_out(&run(tmp.path(), &["hsic", &x, &x, "-B", "200"]));
    assert!(v["p_value"].as_f64().unwrap() <= 3.0 / 201.0, "{v}");
    assert_eq!(v["permutations"], 200);
    assert_eq!(v["kernel_x"]["name"], "rbf");
}

#[test]
fn hsic_mmd_mode() {
    let tmp = TempDir::new().unwrap();
    let x = write_matrix(tmp.path(), "x.csv", &[vec![0.0], vec![1.0]]);
    let v = json_out(&run(tmp.path(), &["hsic", &x, &x, "--mmd", "--kernel", "rbf:0.5"]));
    assert_eq!(v["statistic"], "mmd_u_sq");
    assert!((v["value"].as_f64().unwrap() - ((-1.0f64).exp() - 1.0)).abs() < 1e-12);

    let one = write_matrix(tmp.path(), "one.csv", &[vec![0.0]]);
    let o = run(tmp.path(), &["hsic", &one, &x, "--mmd"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = run(tmp.path(), &["hsic", &x, &x, "--mmd", "-B", "100"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn hsic_reports_ragged_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.csv"), "a,b\n1,2\n3\n").unwrap();
    let y = write_matrix(tmp.path(), "y.csv", &[vec![1.0], vec![2.0]]);
    let o = run(tmp.path(), &["hsic", "bad.csv", &y]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(":3:"), "{}", stderr(&o));
    let o = run(tmp.path(), &["hsic", "missing.csv", &y]);
    assert_eq!(code(&o), 2);
    let o = run(tmp.path(), &["hsic", &y, &y, "--kernel", "poly"]);
    assert_eq!(code(&o), 1);
}
