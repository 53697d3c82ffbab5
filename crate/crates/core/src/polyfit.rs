//! Single-predictor polynomial autoregression `θ(t+p) = a_n θ(t)^n + … + a_0`.
//!
//! Fitting is ordinary least squares on a Vandermonde design. The predictor is
//! centred on its mean and divided by its half-range before the powers are
//! formed, the system is solved by Householder QR, and the coefficients are
//! expanded back onto raw powers of the predictor.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation;
use crate::linalg;
use crate::series::SupervisedSet;

/// Highest degree accepted by [`fit_polynomial`].
pub const MAX_DEGREE: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("degree {0} exceeds the maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("polynomial regression uses a single lag, got {0}")]
    NotSingleLag(usize),
    #[error("{distinct} distinct predictor values cannot determine a degree-{degree} polynomial")]
    RankDeficient { degree: usize, distinct: usize },
    #[error("{pairs} pairs cannot determine {needed} coefficients")]
    TooFewPairs { pairs: usize, needed: usize },
    #[error("no candidate degrees given")]
    NoCandidates,
    #[error("non-finite coefficient in fitted polynomial")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub degree: usize,
    /// `a_0..a_n`, ascending powers of the predictor.
    pub coefficients: Vec<f64>,
    pub horizon_steps: usize,
    pub train_mse: f64,
    /// Undefined (None) when the fitted values are constant.
    pub train_r: Option<f64>,
}

impl PolynomialModel {
    pub fn eval(&self, y: f64) -> f64 {
        horner(&self.coefficients, y)
    }

    pub fn predict(&self, predictors: &[f64]) -> Vec<f64> {
        predictors.iter().map(|&y| self.eval(y)).collect()
    }
}

fn horner(coefficients: &[f64], y: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * y + a)
}

/// Evaluates `Σ a_k y^k` by Horner's rule.
pub fn eval_polynomial(model: &PolynomialModel, y: f64) -> f64 {
    model.eval(y)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Least-squares polynomial of `degree` in `x` through `(x, y)`; raw
/// ascending coefficients.
pub fn least_squares_coefficients(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>, PolyError> {
    if degree > MAX_DEGREE {
        return Err(PolyError::DegreeTooLarge(degree));
    }
    let needed = degree + 1;
    if x.len() < needed {
        return Err(PolyError::TooFewPairs {
            pairs: x.len(),
            needed,
        });
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    sorted.dedup();
    if sorted.len() < needed {
        return Err(PolyError::RankDeficient {
            degree,
            distinct: sorted.len(),
        });
    }

    let center = x.iter().sum::<f64>() / x.len() as f64;
    let half_range = x.iter().map(|v| (v - center).abs()).fold(0.0, f64::max);
    let scale = if half_range > 0.0 { half_range } else { 1.0 };

    let design = DMatrix::from_fn(x.len(), needed, |i, k| ((x[i] - center) / scale).powi(k as i32));
    let rhs = DVector::from_column_slice(y);
    let b = linalg::least_squares(&design, &rhs).ok_or(PolyError::RankDeficient {
        degree,
        distinct: sorted.len(),
    })?;

    // Expand Σ b_k ((y - c)/s)^k onto raw powers of y.
    let mut raw = vec![0.0; needed];
    for (k, bk) in b.iter().enumerate() {
        let w = bk / scale.powi(k as i32);
        for (j, slot) in raw.iter_mut().enumerate().take(k + 1) {
            *slot += w * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    if raw.iter().any(|a| !a.is_finite()) {
        return Err(PolyError::NonFinite);
    }
    Ok(raw)
}

/// Fits `θ(t+p) = f(θ(t))` on a single-lag supervised set.
pub fn fit_polynomial(pairs: &SupervisedSet, degree: usize) -> Result<PolynomialModel, PolyError> {
    if pairs.num_lags != 1 {
        return Err(PolyError::NotSingleLag(pairs.num_lags));
    }
    let x = pairs.last_lag();
    let coefficients = least_squares_coefficients(&x, &pairs.targets, degree)?;
    let fitted: Vec<f64> = x.iter().map(|&v| horner(&coefficients, v)).collect();
    let train_mse = evaluation::mse(&pairs.targets, &fitted).map_err(|_| PolyError::NonFinite)?;
    let train_r = evaluation::correlation_r(&pairs.targets, &fitted).ok();
    Ok(PolynomialModel {
        degree,
        coefficients,
        horizon_steps: pairs.horizon_steps,
        train_mse,
        train_r,
    })
}

type Scored = Result<(PolynomialModel, f64), PolyError>;

/// Validation score of one candidate degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeScore {
    pub degree: usize,
    pub validation_mse: Option<f64>,
    pub error: Option<String>,
}

/// Fits every candidate on `train` and keeps the lowest validation MSE;
/// near-equal scores resolve to the lower degree.
///
/// When every candidate fails, the error of the first candidate is returned.
pub fn select_degree(
    train: &SupervisedSet,
    candidates: &[usize],
    validation: &SupervisedSet,
) -> Result<(PolynomialModel, Vec<DegreeScore>), PolyError> {
    if candidates.is_empty() {
        return Err(PolyError::NoCandidates);
    }
    let val_x = validation.last_lag();
    let results: Vec<(usize, Scored)> = candidates
        .par_iter()
        .map(|&degree| {
            let fitted = fit_polynomial(train, degree).and_then(|m| {
                let pred = m.predict(&val_x);
                let mse = evaluation::mse(&validation.targets, &pred).map_err(|_| PolyError::NonFinite)?;
                if mse.is_finite() {
                    Ok((m, mse))
                } else {
                    Err(PolyError::NonFinite)
                }
            });
            (degree, fitted)
        })
        .collect();

    let scores = results
        .iter()
        .map(|(degree, r)| DegreeScore {
            degree: *degree,
            validation_mse: r.as_ref().ok().map(|(_, mse)| *mse),
            error: r.as_ref().err().map(|e| e.to_string()),
        })
        .collect();

    // Scores within this band of each other count as a tie.
    let scale = validation.targets.iter().map(|t| t * t).sum::<f64>() / validation.len().max(1) as f64;
    let tol = 1e-12 * (1.0 + scale);

    let mut best: Option<(PolynomialModel, f64)> = None;
    let mut first_err = None;
    for (_, r) in results {
        match r {
            Ok((m, mse)) => {
                let better = match &best {
                    None => true,
                    Some((bm, bmse)) => mse < bmse - tol || (mse <= bmse + tol && m.degree < bm.degree),
                };
                if better {
                    best = Some((m, mse));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((m, _)) => Ok((m, scores)),
        None => Err(first_err.unwrap_or(PolyError::NoCandidates)),
    }
}
