use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use windcast::evaluation::evaluate;
use windcast::polyfit::{eval_polynomial, PolynomialModel};
use windcast_cli::commands::read_predictions;

fn windcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_windcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = windcast(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON summary on stdout")
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("error line");
    let v: Value = serde_json::from_str(line).expect("JSON error");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 600 rows of seasonal AR(1) data.
fn dataset(dir: &Path) -> PathBuf {
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"mean": 8, "amplitude": 3, "period_steps": 200, "ar": [0.7], "sigma": 0.6, "n": 600, "seed": 5}"#,
    )
    .unwrap();
    let data = dir.join("data.csv");
    ok(&["simulate", "--spec", p(&spec), "--output", p(&data)]);
    data
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fit_horizon_off_grid_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let out = windcast(&["fit", "--data", p(&data), "--horizon-hours", "7", "--output-dir", p(dir.path())]);
    assert_eq!(error_kind(&out), "config");
    assert!(!dir.path().join("model.json").exists());
}

#[test]
fn fit_six_hours_is_two_steps() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let out_dir = dir.path().join("fit");
    ok(&["fit", "--data", p(&data), "--horizon-hours", "6", "--model", "arma", "--output-dir", p(&out_dir)]);
    let model = read_json(&out_dir.join("model.json"));
    assert_eq!(model["horizon_steps"], 2);
    assert_eq!(model["family"], "arma");
    assert!(model["ar_operator"].as_str().unwrap().starts_with("1 "));
    let report = read_json(&out_dir.join("fit_report.json"));
    assert_eq!(report["horizon_steps"], 2);
    assert_eq!(report["train_len"], 420);
    assert!(report["test_metrics"]["mse"].as_f64().unwrap() > 0.0);
}

#[test]
fn twelve_hour_network_records_its_topology() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"mlp": {"max_epochs": 30, "trials": 1}}"#).unwrap();
    let out_dir = dir.path().join("fit");
    ok(&[
        "fit", "--config", p(&config), "--data", p(&data), "--model", "mlp", "--horizon-hours", "12", "--output-dir",
        p(&out_dir),
    ]);
    let model = read_json(&out_dir.join("model.json"));
    assert_eq!(model["family"], "mlp");
    assert_eq!(model["topology"], serde_json::json!([2, 3, 1, 1]));
    assert_eq!(model["hidden_layer_sizes"], serde_json::json!([3, 1]));
    assert_eq!(model["activations"], serde_json::json!(["logsig", "logsig", "logsig"]));
    assert_eq!(model["trainer"], "trainscg");
    assert_eq!(model["params"].as_array().unwrap().len(), 3 * 2 + 3 + 3 + 1 + 1 + 1);
}

fn write_rows(path: &Path, values: &[f64]) {
    let mut text = String::from("timestamp,wind_speed_mps\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("2001-08-01T{:02}:00:00Z,{v}\n", 3 * i));
    }
    fs::write(path, text).unwrap();
}

const QUADRATIC_MODEL: &str = r#"{
  "schema_version": 1,
  "horizon_hours": 3,
  "horizon_steps": 1,
  "step_seconds": 10800,
  "num_lags": 1,
  "train_len": 1,
  "family": "polynomial",
  "degree": 2,
  "coefficients": [0.7173, 0.893, 0.0045]
}"#;

#[test]
fn forecast_with_reference_quadratic() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write_rows(&data, &[10.0, 9.0]);
    let model = dir.path().join("model.json");
    fs::write(&model, QUADRATIC_MODEL).unwrap();
    let out = dir.path().join("pred.csv");
    let summary = ok(&["forecast", "--model-file", p(&model), "--data", p(&data), "--steps", "2", "--output", p(&out)]);
    assert_eq!(summary["rows"], 2);

    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], ["timestamp", "observed", "predicted"]);
    assert_eq!(rows[1][0], "2001-08-01T03:00:00Z");
    assert_eq!(rows[1][1], "9");
    let predicted: f64 = rows[1][2].parse().unwrap();
    let oracle = eval_polynomial(
        &PolynomialModel {
            degree: 2,
            coefficients: vec![0.7173, 0.893, 0.0045],
            horizon_steps: 1,
            train_mse: 0.0,
            train_r: None,
        },
        10.0,
    );
    assert_eq!(predicted, oracle);
    assert!((predicted - 10.0973).abs() < 1e-10);
    // Past the data: observed is empty and the forecast continues recursively.
    assert_eq!(rows[2][1], "");
    let next: f64 = rows[2][2].parse().unwrap();
    assert!((next - (0.7173 + 0.893 * 9.0 + 0.0045 * 81.0)).abs() < 1e-12);
}

#[test]
fn zero_steps_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write_rows(&data, &[10.0, 9.0]);
    let model = dir.path().join("model.json");
    fs::write(&model, QUADRATIC_MODEL).unwrap();
    let out = dir.path().join("pred.csv");
    ok(&["forecast", "--model-file", p(&model), "--data", p(&data), "--steps", "0", "--output", p(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "timestamp,observed,predicted\n");
}

#[test]
fn tampered_model_file_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    write_rows(&data, &[10.0, 9.0]);
    let model = dir.path().join("model.json");
    let out = dir.path().join("pred.csv");

    fs::write(&model, QUADRATIC_MODEL.replace("\"degree\": 2,\n", "")).unwrap();
    let run = windcast(&["forecast", "--model-file", p(&model), "--data", p(&data), "--output", p(&out)]);
    assert_eq!(error_kind(&run), "schema");

    fs::write(&model, QUADRATIC_MODEL.replace("\"schema_version\": 1", "\"schema_version\": 7")).unwrap();
    let run = windcast(&["forecast", "--model-file", p(&model), "--data", p(&data), "--output", p(&out)]);
    assert_eq!(error_kind(&run), "schema");
    assert!(!out.exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate", "--preset", "wind-like", "--n", "500", "--seed", "3", "--output", p(&a)]);
    ok(&["simulate", "--preset", "wind-like", "--n", "500", "--seed", "3", "--output", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    ok(&["simulate", "--preset", "wind-like", "--n", "500", "--seed", "4", "--output", p(&c)]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let series = windcast::series::load_series(&a).unwrap();
    assert_eq!(series.len(), 500);
    assert_eq!(series.step_seconds, 10_800);
}

#[test]
fn silent_generator_gives_a_constant_column() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"mean": 8, "sigma": 0, "n": 20}"#).unwrap();
    let out = dir.path().join("s.csv");
    let summary = ok(&["simulate", "--spec", p(&spec), "--output", p(&out)]);
    assert_eq!((summary["rows"].as_u64(), summary["clipped"].as_u64()), (Some(20), Some(0)));
    let series = windcast::series::load_series(&out).unwrap();
    assert!(series.values.iter().all(|&v| v == 8.0));
}

#[test]
fn explosive_generator_is_rejected() {
    let dir = TempDir::new().unwrap();
    let spec = dir.path().join("spec.json");
    fs::write(&spec, r#"{"ar": [1.1]}"#).unwrap();
    let run = windcast(&["simulate", "--spec", p(&spec), "--output", p(&dir.path().join("s.csv"))]);
    assert_eq!(error_kind(&run), "arma");
}

fn compare_config(dir: &Path, body: &str) -> PathBuf {
    let config = dir.join("run.json");
    fs::write(&config, body).unwrap();
    config
}

#[test]
fn compare_metrics_match_the_evaluation_module() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let config = compare_config(dir.path(), r#"{"mlp": {"max_epochs": 40, "trials": 2}, "seed": 3}"#);
    let out_dir = dir.path().join("cmp");
    ok(&["compare", "--config", p(&config), "--data", p(&data), "--output-dir", p(&out_dir)]);

    let metrics = read_json(&out_dir.join("metrics.json"));
    let horizons = metrics["horizons"].as_array().unwrap();
    assert_eq!(horizons.len(), 3);
    for h in horizons {
        let hours = h["horizon_hours"].as_u64().unwrap();
        let results = h["results"].as_array().unwrap();
        assert_eq!(results[0]["family"], "persistence");
        assert_eq!(results.len(), 5);
        for r in results {
            let family = r["family"].as_str().unwrap();
            let plot = out_dir.join(format!("plot_{family}_{hours}h.csv"));
            let (obs, pred) = read_predictions(&plot).unwrap();
            let direct = evaluate(&obs, &pred).unwrap();
            let m = &r["metrics"];
            assert_eq!(m["n"].as_u64().unwrap() as usize, direct.n);
            assert_eq!(m["mse"].as_f64().unwrap().to_bits(), direct.mse.to_bits(), "{family}");
            assert_eq!(m["r"].as_f64().unwrap().to_bits(), direct.r.to_bits(), "{family}");
            assert_eq!(m["ce"].as_f64().unwrap().to_bits(), direct.ce.to_bits(), "{family}");
            assert_eq!(m["r_squared"].as_f64().unwrap().to_bits(), direct.r_squared.to_bits());
            assert_eq!(m["msre"].as_f64().map(f64::to_bits), direct.msre.map(f64::to_bits));
        }
        assert_eq!(h["ranking"].as_array().unwrap().len(), 5);
    }
    let ranking = fs::read_to_string(out_dir.join("ranking.txt")).unwrap();
    assert!(ranking.contains("horizon 12 h (4 steps)") && ranking.contains("persistence"));

    // `evaluate` on an emitted plot file reproduces the stored numbers.
    let plot = out_dir.join("plot_polynomial_6h.csv");
    let scored = out_dir.join("poly6.json");
    ok(&["evaluate", "--predictions", p(&plot), "--output", p(&scored)]);
    let stored = &horizons[1]["results"][1]["metrics"];
    assert_eq!(&read_json(&scored), stored);
}

#[test]
fn compare_skips_a_failing_family() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let config = compare_config(
        dir.path(),
        r#"{"families": ["polynomial", "arma"], "arma": {"p": 30, "q": 30}, "horizons_hours": [3]}"#,
    );
    let out_dir = dir.path().join("cmp");
    let out = windcast(&["compare", "--config", p(&config), "--data", p(&data), "--output-dir", p(&out_dir)]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: arma at 3 h skipped"));
    let metrics = read_json(&out_dir.join("metrics.json"));
    let h = &metrics["horizons"][0];
    assert_eq!(h["ranking"].as_array().unwrap().len(), 2);
    assert_eq!(h["failures"][0]["family"], "arma");
    assert!(!out_dir.join("plot_arma_3h.csv").exists());
}

#[test]
fn compare_fails_when_every_family_fails() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let config = compare_config(dir.path(), r#"{"families": ["arma"], "arma": {"p": 30, "q": 30}}"#);
    let out = windcast(&["compare", "--config", p(&config), "--data", p(&data), "--output-dir", p(dir.path())]);
    assert_eq!(error_kind(&out), "compare");
}

#[test]
fn compare_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let config = compare_config(dir.path(), r#"{"mlp": {"max_epochs": 40}, "horizons_hours": [6]}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["compare", "--config", p(&config), "--data", p(&data), "--seed", "8", "--output-dir", p(&a)]);
    ok(&["compare", "--config", p(&config), "--data", p(&data), "--seed", "8", "--output-dir", p(&b)]);
    assert_eq!(fs::read(a.join("metrics.json")).unwrap(), fs::read(b.join("metrics.json")).unwrap());
    assert_eq!(
        fs::read(a.join("plot_mlp_6h.csv")).unwrap(),
        fs::read(b.join("plot_mlp_6h.csv")).unwrap()
    );
}

#[test]
fn fitted_model_forecast_matches_fit_report() {
    let dir = TempDir::new().unwrap();
    let data = dataset(dir.path());
    let out_dir = dir.path().join("fit");
    ok(&["fit", "--data", p(&data), "--model", "arima", "--horizon-hours", "3", "--output-dir", p(&out_dir)]);
    let model = out_dir.join("model.json");
    let pred = out_dir.join("predictions.csv");
    let summary = ok(&["forecast", "--model-file", p(&model), "--data", p(&data)]);
    assert_eq!(summary["rows"], 180);
    assert_eq!(summary["start"], 420);
    let (obs, predicted) = read_predictions(&pred).unwrap();
    let report = read_json(&out_dir.join("fit_report.json"));
    let direct = evaluate(&obs, &predicted).unwrap();
    assert_eq!(report["test_metrics"]["mse"].as_f64().unwrap().to_bits(), direct.mse.to_bits());
}

#[test]
fn usage_errors_are_json_too() {
    let out = windcast(&["fit", "--horizon-hours", "soon"]);
    assert_eq!(error_kind(&out), "config");
    let out = windcast(&["fit", "--model", "kalman"]);
    assert_eq!(error_kind(&out), "config");
    let out = windcast(&["fit", "--model", "arma"]);
    assert_eq!(error_kind(&out), "config");
}
