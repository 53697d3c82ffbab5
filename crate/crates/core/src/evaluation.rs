//! Fit statistics for (observed, predicted) pairs and model ranking.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {observed} observed vs {predicted} predicted")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("need at least {needed} pairs, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: {0} sequence is constant")]
    UndefinedCorrelation(&'static str),
    #[error("series of length {len} too short for horizon {horizon}")]
    TooShort { len: usize, horizon: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Goodness-of-fit statistics for one (model, horizon) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub r: f64,
    pub mse: f64,
    /// Absent when any observed value is zero.
    pub msre: Option<f64>,
    pub ce: f64,
    pub r_squared: f64,
}

fn check_pair(observed: &[f64], predicted: &[f64], min: usize) -> Result<(), EvalError> {
    if observed.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    if observed.len() < min {
        return Err(EvalError::TooFew {
            needed: min,
            got: observed.len(),
        });
    }
    if observed.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("observed"));
    }
    if predicted.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite("predicted"));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Pearson correlation between observations and predictions.
pub fn correlation_r(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(observed, predicted, 2)?;
    let mo = mean(observed);
    let mp = mean(predicted);
    let (mut sop, mut soo, mut spp) = (0.0, 0.0, 0.0);
    for (o, p) in observed.iter().zip(predicted) {
        let (a, b) = (o - mo, p - mp);
        sop += a * b;
        soo += a * a;
        spp += b * b;
    }
    if soo == 0.0 {
        return Err(EvalError::UndefinedCorrelation("observed"));
    }
    if spp == 0.0 {
        return Err(EvalError::UndefinedCorrelation("predicted"));
    }
    Ok((sop / (soo * spp).sqrt()).clamp(-1.0, 1.0))
}

pub fn mse(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(observed, predicted, 1)?;
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(sse / observed.len() as f64)
}

/// MSRE, coefficient of efficiency and r².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryMetrics {
    pub msre: Option<f64>,
    pub ce: f64,
    pub r_squared: f64,
}

/// Mean squared relative error; `None` when any observation is zero.
pub fn msre(observed: &[f64], predicted: &[f64]) -> Result<Option<f64>, EvalError> {
    check_pair(observed, predicted, 1)?;
    if observed.contains(&0.0) {
        return Ok(None);
    }
    let sum: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| ((o - p) / o).powi(2))
        .sum();
    Ok(Some(sum / observed.len() as f64))
}

/// Coefficient of efficiency (Nash-Sutcliffe): 1 is perfect, 0 matches the
/// observed-mean predictor.
pub fn coefficient_of_efficiency(observed: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(observed, predicted, 2)?;
    let mo = mean(observed);
    let sst: f64 = observed.iter().map(|o| (o - mo) * (o - mo)).sum();
    if sst == 0.0 {
        return Err(EvalError::UndefinedCorrelation("observed"));
    }
    let sse: f64 = observed.iter().zip(predicted).map(|(o, p)| (o - p) * (o - p)).sum();
    Ok(1.0 - sse / sst)
}

pub fn auxiliary_metrics(observed: &[f64], predicted: &[f64]) -> Result<AuxiliaryMetrics, EvalError> {
    let r = correlation_r(observed, predicted)?;
    Ok(AuxiliaryMetrics {
        msre: msre(observed, predicted)?,
        ce: coefficient_of_efficiency(observed, predicted)?,
        r_squared: r * r,
    })
}

/// Every statistic at once.
pub fn evaluate(observed: &[f64], predicted: &[f64]) -> Result<MetricReport, EvalError> {
    let r = correlation_r(observed, predicted)?;
    let aux = auxiliary_metrics(observed, predicted)?;
    Ok(MetricReport {
        n: observed.len(),
        r,
        mse: mse(observed, predicted)?,
        msre: aux.msre,
        ce: aux.ce,
        r_squared: aux.r_squared,
    })
}

/// Observations and the matching persistence predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// No-skill reference: the value `horizon_steps` ahead is predicted to equal
/// the current one.
pub fn persistence_baseline(values: &[f64], horizon_steps: usize) -> Result<PairSet, EvalError> {
    if horizon_steps == 0 || values.len() <= horizon_steps {
        return Err(EvalError::TooShort {
            len: values.len(),
            horizon: horizon_steps,
        });
    }
    Ok(PairSet {
        observed: values[horizon_steps..].to_vec(),
        predicted: values[..values.len() - horizon_steps].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub label: String,
    pub metrics: MetricReport,
}

/// Ranks entries by ascending MSE, then descending r; otherwise stable.
pub fn compare_report(entries: Vec<(String, MetricReport)>) -> Vec<RankedEntry> {
    let mut entries = entries;
    entries.sort_by(|a, b| {
        a.1.mse
            .partial_cmp(&b.1.mse)
            .unwrap_or(Ordering::Equal)
            .then_with(|| b.1.r.partial_cmp(&a.1.r).unwrap_or(Ordering::Equal))
    });
    entries
        .into_iter()
        .enumerate()
        .map(|(i, (label, metrics))| RankedEntry {
            rank: i + 1,
            label,
            metrics,
        })
        .collect()
}

/// Fixed-width text rendering of a ranking.
pub fn render_table(title: &str, ranked: &[RankedEntry]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "{:>4}  {:<14} {:>8} {:>12} {:>10} {:>12} {:>10} {:>10}",
        "rank", "model", "n", "MSE", "r", "MSRE", "CE", "r^2"
    );
    for e in ranked {
        let m = &e.metrics;
        let msre = m.msre.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(
            out,
            "{:>4}  {:<14} {:>8} {:>12.6} {:>10.6} {:>12} {:>10.6} {:>10.6}",
            e.rank, e.label, m.n, m.mse, m.r, msre, m.ce, m.r_squared
        );
    }
    out
}
