//! The five subcommands. Each writes its artifacts and returns a summary.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use windcast::arma::{
    check_stationarity, estimate_arma, fit_arima, select_order, OrderScore, StationarityMethod, StationarityReport,
};
use windcast::evaluation::{compare_report, evaluate, persistence_baseline, render_table, MetricReport};
use windcast::neuralnet::{fit_predict_pipeline, TrainReport};
use windcast::polyfit::{fit_polynomial, select_degree, DegreeScore};
use windcast::series::{format_timestamp, load_series, make_supervised, split_train_test};
use windcast::TimeSeries;

use crate::config::{horizon_steps, Family, RunConfig};
use crate::model::{FittedModel, ModelFile, SCHEMA_VERSION};
use crate::simulate::{generate, GeneratorSpec};
use crate::{io_err, CliError};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Diagnostics {
    Polynomial {
        degree: usize,
        train_mse: f64,
        train_r: Option<f64>,
        degree_scores: Vec<DegreeScore>,
    },
    Arma {
        css: f64,
        n_effective: usize,
        refine_iterations: usize,
        warning: Option<String>,
        stationarity: StationarityReport,
        order_scores: Vec<OrderScore>,
    },
    Arima {
        css: f64,
        n_effective: usize,
        refine_iterations: usize,
        warning: Option<String>,
        stationarity: StationarityReport,
    },
    Mlp {
        report: TrainReport,
        trial_scores: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub horizon_hours: u32,
    pub horizon_steps: usize,
    pub train_len: usize,
    pub test_len: usize,
    pub diagnostics: Diagnostics,
    /// Scores over the test split.
    pub test_metrics: Option<MetricReport>,
}

/// A fitted family with its test-split forecasts.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub file: ModelFile,
    pub diagnostics: Diagnostics,
    pub test_predictions: Vec<f64>,
}

fn load_split(cfg: &RunConfig) -> Result<(TimeSeries, TimeSeries, TimeSeries), CliError> {
    let series = load_series(cfg.data_path()?)?;
    let (train, test) = split_train_test(&series, cfg.train_fraction)?;
    Ok((series, train, test))
}

/// Fits one family on `train` and forecasts every point of `test`.
pub fn fit_family(
    cfg: &RunConfig,
    family: Family,
    train: &TimeSeries,
    test: &TimeSeries,
    horizon_hours: u32,
) -> Result<Fitted, CliError> {
    let h = horizon_steps(horizon_hours, train.step_seconds)?;
    let values = &train.values;
    let stationarity = |m| check_stationarity(m, StationarityMethod::UnitRoot);
    let (model, num_lags, diagnostics) = match family {
        Family::Polynomial => {
            let set = make_supervised(values, 1, h)?;
            let opts = &cfg.polynomial;
            let (degree, degree_scores) = if opts.degrees.len() == 1 {
                (opts.degrees[0], Vec::new())
            } else {
                let (head, tail) = set.split_tail(opts.validation_fraction);
                let (best, scores) = select_degree(&head, &opts.degrees, &tail)?;
                (best.degree, scores)
            };
            let poly = fit_polynomial(&set, degree)?;
            let diagnostics = Diagnostics::Polynomial {
                degree,
                train_mse: poly.train_mse,
                train_r: poly.train_r,
                degree_scores,
            };
            let model = FittedModel::Polynomial {
                degree,
                coefficients: poly.coefficients,
            };
            (model, 1, diagnostics)
        }
        Family::Arma => {
            let (fit, order_scores) = match &cfg.arma.select {
                Some(s) => select_order(values, s.p_max, s.q_max, s.criterion)?,
                None => (estimate_arma(values, cfg.arma.p, cfg.arma.q)?, Vec::new()),
            };
            let diagnostics = Diagnostics::Arma {
                css: fit.css,
                n_effective: fit.n_effective,
                refine_iterations: fit.refine_iterations,
                warning: fit.warning,
                stationarity: stationarity(&fit.model),
                order_scores,
            };
            let lags = fit.model.p.max(fit.model.q).max(1);
            (FittedModel::arma(fit.model), lags, diagnostics)
        }
        Family::Arima => {
            let o = &cfg.arima;
            let fit = fit_arima(values, o.p, o.d, o.q)?;
            let diagnostics = Diagnostics::Arima {
                css: fit.css,
                n_effective: fit.n_effective,
                refine_iterations: fit.refine_iterations,
                warning: fit.warning,
                stationarity: stationarity(&fit.model.inner),
            };
            let lags = fit.model.inner.p.max(fit.model.inner.q).max(1) + fit.model.d;
            (FittedModel::arima(fit.model), lags, diagnostics)
        }
        Family::Mlp => {
            let recipe = cfg.mlp_recipe(horizon_hours);
            let out = fit_predict_pipeline(
                train,
                test,
                &recipe.config(cfg.seed),
                &recipe.train,
                h,
                recipe.num_lags,
                cfg.target_range,
            )?;
            let model = FittedModel::mlp(&out.network, recipe.train.algorithm, out.seed, out.scaling);
            let diagnostics = Diagnostics::Mlp {
                report: out.report,
                trial_scores: out.trial_scores,
            };
            (model, recipe.num_lags, diagnostics)
        }
    };
    let file = ModelFile {
        schema_version: SCHEMA_VERSION,
        horizon_hours,
        horizon_steps: h,
        step_seconds: train.step_seconds,
        num_lags,
        train_len: train.len(),
        model,
    };
    let all: Vec<f64> = train.iter().chain(test.iter()).collect();
    let test_predictions = file.predict(&all, train.len()..all.len())?;
    Ok(Fitted {
        file,
        diagnostics,
        test_predictions,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes `timestamp,observed,predicted` rows for indices `start..`; the
/// observed cell is empty past the end of `series`.
pub fn write_predictions(path: &Path, series: &TimeSeries, start: usize, predicted: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| io_err(path, e);
    w.write_record(["timestamp", "observed", "predicted"]).map_err(fail)?;
    for (k, p) in predicted.iter().enumerate() {
        let i = start + k;
        let observed = series.values.get(i).map_or_else(String::new, |v| v.to_string());
        w.write_record([format_timestamp(series.timestamp_at(i)), observed, p.to_string()])
            .map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(path, e))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Observed and predicted columns of a predictions file, skipping rows
/// without an observation.
pub fn read_predictions(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header = rdr.headers().map_err(|e| io_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["timestamp", "observed", "predicted"] {
        return Err(CliError::Schema(format!(
            "{}: expected header timestamp,observed,predicted",
            path.display()
        )));
    }
    let mut observed = Vec::new();
    let mut predicted = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Schema(format!("{}: bad number `{s}` on line {}", path.display(), i + 2)))
        };
        if rec[1].trim().is_empty() {
            continue;
        }
        observed.push(parse(&rec[1])?);
        predicted.push(parse(&rec[2])?);
    }
    Ok((observed, predicted))
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    #[serde(skip)]
    pub model: ModelFile,
    #[serde(skip)]
    pub report: FitReport,
}

/// Fits `cfg.model` at `cfg.horizon_hours` and writes `model.json` and
/// `fit_report.json` into the output directory.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitOutcome, CliError> {
    let (_, train, test) = load_split(cfg)?;
    let fitted = fit_family(cfg, cfg.model, &train, &test, cfg.horizon_hours)?;
    let test_metrics = evaluate(&test.values, &fitted.test_predictions).ok();
    let report = FitReport {
        horizon_hours: cfg.horizon_hours,
        horizon_steps: fitted.file.horizon_steps,
        train_len: train.len(),
        test_len: test.len(),
        diagnostics: fitted.diagnostics,
        test_metrics,
    };
    let model_path = cfg.output_dir.join("model.json");
    let report_path = cfg.output_dir.join("fit_report.json");
    write_text(&model_path, &(fitted.file.to_json()? + "\n"))?;
    write_json(&report_path, &report)?;
    Ok(FitOutcome {
        model_path,
        report_path,
        model: fitted.file,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ForecastOutcome {
    pub path: PathBuf,
    pub rows: usize,
    pub start: usize,
}

/// Forecasts `steps` rows from index `start` (default: the end of the
/// training split) to the end of the data (default row count).
pub fn cmd_forecast(
    model_path: &Path,
    data_path: &Path,
    steps: Option<usize>,
    start: Option<usize>,
    output: &Path,
) -> Result<ForecastOutcome, CliError> {
    let file = ModelFile::load(model_path)?;
    let series = load_series(data_path)?;
    if series.step_seconds != file.step_seconds {
        return Err(CliError::Config(format!(
            "data step {} s differs from the model's {} s",
            series.step_seconds, file.step_seconds
        )));
    }
    let start = start.unwrap_or(file.train_len);
    let steps = steps.unwrap_or_else(|| series.len().saturating_sub(start));
    let predicted = if steps == 0 {
        Vec::new()
    } else {
        file.predict(&series.values, start..start + steps)?
    };
    write_predictions(output, &series, start, &predicted)?;
    Ok(ForecastOutcome {
        path: output.to_path_buf(),
        rows: predicted.len(),
        start,
    })
}

/// Scores a predictions file and writes the report as JSON.
pub fn cmd_evaluate(predictions: &Path, output: &Path) -> Result<MetricReport, CliError> {
    let (observed, predicted) = read_predictions(predictions)?;
    let report = evaluate(&observed, &predicted)?;
    write_json(output, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub family: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFailure {
    pub family: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonMetrics {
    pub horizon_hours: u32,
    pub horizon_steps: usize,
    /// Persistence first, then the families in configured order.
    pub results: Vec<FamilyScore>,
    /// Families from lowest to highest MSE.
    pub ranking: Vec<String>,
    pub failures: Vec<FamilyFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub schema_version: u32,
    pub seed: u64,
    pub step_seconds: i64,
    pub train_len: usize,
    pub test_len: usize,
    pub horizons: Vec<HorizonMetrics>,
}

impl CompareMetrics {
    pub fn mse(&self, horizon_hours: u32, family: &str) -> Option<f64> {
        self.horizons
            .iter()
            .find(|h| h.horizon_hours == horizon_hours)?
            .results
            .iter()
            .find(|r| r.family == family)
            .map(|r| r.metrics.mse)
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub metrics: CompareMetrics,
    pub metrics_path: PathBuf,
    pub ranking_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
    /// One line per skipped (family, horizon).
    pub warnings: Vec<String>,
}

pub const PERSISTENCE: &str = "persistence";

pub fn plot_file_name(family: &str, horizon_hours: u32) -> String {
    format!("plot_{family}_{horizon_hours}h.csv")
}

/// Fits every configured family at every configured horizon on the
/// training split and scores each on the test split next to persistence.
pub fn cmd_compare(cfg: &RunConfig) -> Result<CompareOutcome, CliError> {
    let (series, train, test) = load_split(cfg)?;
    let n_train = train.len();
    let test_range = n_train..series.len();
    let mut steps_per = Vec::with_capacity(cfg.horizons_hours.len());
    for &hours in &cfg.horizons_hours {
        steps_per.push((hours, horizon_steps(hours, series.step_seconds)?));
    }

    let jobs: Vec<(u32, Family)> = steps_per
        .iter()
        .flat_map(|&(hours, _)| cfg.families.iter().map(move |&f| (hours, f)))
        .collect();
    let fits: Vec<Result<Fitted, CliError>> = jobs
        .par_iter()
        .map(|&(hours, family)| fit_family(cfg, family, &train, &test, hours))
        .collect();
    if !jobs.is_empty() && fits.iter().all(Result::is_err) {
        let msgs: Vec<String> = jobs
            .iter()
            .zip(&fits)
            .filter_map(|((h, f), r)| r.as_ref().err().map(|e| format!("{} at {h} h: {e}", f.name())))
            .collect();
        return Err(CliError::AllFamiliesFailed(msgs.join("; ")));
    }

    let mut fits = fits.into_iter();
    let mut horizons = Vec::new();
    let mut warnings = Vec::new();
    let mut plot_paths = Vec::new();
    let mut ranking_text = String::new();
    for &(hours, h) in &steps_per {
        let mut results = Vec::new();
        let mut failures = Vec::new();

        let pairs = persistence_baseline(&series.values, h)?;
        let skip = pairs.predicted.len() - test.len();
        let persistence = pairs.predicted[skip..].to_vec();
        let mut predictions = vec![(PERSISTENCE.to_string(), persistence)];
        for &family in &cfg.families {
            match fits.next().expect("one fit per job") {
                Ok(f) => predictions.push((family.name().to_string(), f.test_predictions)),
                Err(e) => {
                    warnings.push(format!("{} at {hours} h skipped: {e}", family.name()));
                    failures.push(FamilyFailure {
                        family: family.name().to_string(),
                        error: e.to_string(),
                    });
                }
            }
        }

        for (family, predicted) in predictions {
            let path = cfg.output_dir.join(plot_file_name(&family, hours));
            write_predictions(&path, &series, test_range.start, &predicted)?;
            plot_paths.push(path);
            match evaluate(&test.values, &predicted) {
                Ok(metrics) => results.push(FamilyScore { family, metrics }),
                Err(e) => {
                    warnings.push(format!("{family} at {hours} h not scored: {e}"));
                    failures.push(FamilyFailure {
                        family,
                        error: e.to_string(),
                    });
                }
            }
        }

        let ranked = compare_report(results.iter().map(|r| (r.family.clone(), r.metrics)).collect());
        ranking_text.push_str(&render_table(&format!("horizon {hours} h ({h} steps)"), &ranked));
        ranking_text.push('\n');
        horizons.push(HorizonMetrics {
            horizon_hours: hours,
            horizon_steps: h,
            ranking: ranked.into_iter().map(|e| e.label).collect(),
            results,
            failures,
        });
    }

    let metrics = CompareMetrics {
        schema_version: SCHEMA_VERSION,
        seed: cfg.seed,
        step_seconds: series.step_seconds,
        train_len: n_train,
        test_len: test.len(),
        horizons,
    };
    let metrics_path = cfg.output_dir.join("metrics.json");
    let ranking_path = cfg.output_dir.join("ranking.txt");
    write_json(&metrics_path, &metrics)?;
    write_text(&ranking_path, &ranking_text)?;
    Ok(CompareOutcome {
        metrics,
        metrics_path,
        ranking_path,
        plot_paths,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutcome {
    pub path: PathBuf,
    pub rows: usize,
    pub clipped: usize,
}

/// Writes a generated series in the input CSV format.
pub fn cmd_simulate(spec: &GeneratorSpec, output: &Path) -> Result<SimulateOutcome, CliError> {
    let start = spec.start_seconds()?;
    let generated = generate(spec)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| io_err(output, e);
    w.write_record(["timestamp", "wind_speed_mps"]).map_err(fail)?;
    for (i, v) in generated.values.iter().enumerate() {
        let ts = start + spec.step_seconds * i as i64;
        w.write_record([format_timestamp(ts), v.to_string()]).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(output, e))?;
    write_text(output, &String::from_utf8(bytes).expect("csv output is UTF-8"))?;
    Ok(SimulateOutcome {
        path: output.to_path_buf(),
        rows: generated.values.len(),
        clipped: generated.clipped,
    })
}
