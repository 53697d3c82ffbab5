//! ARMA(p, q) and ARIMA(p, d, q) models in lag-operator form.
//!
//! On the mean-adjusted series `x`, a model with AR coefficients `ψ` and MA
//! coefficients `φ` satisfies
//!
//! ```text
//! Ψ(L) x_t = Φ(L) ε_t,   Ψ(L) = 1 - Σ ψ_s L^s,   Φ(L) = 1 - Σ φ_s L^s
//! ```
//!
//! so an operator printed as `1 - 0.9876 L` stores `ψ_1 = +0.9876`.
//!
//! Estimation is conditional least squares: residuals before the first
//! usable sample are fixed at zero. A long autoregression supplies residual
//! proxies, a linear regression on lagged values and proxies gives the
//! starting point, and Gauss-Newton polishes it on the exact conditional sum
//! of squares.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::series::{self, SeriesError};

/// Samples generated and discarded before a simulated series starts.
pub const BURN_IN: usize = 500;

/// Upper bound on the order of the stage-one autoregression.
pub const LONG_AR_MAX_ORDER: usize = 20;

const MAX_REFINE_ITERATIONS: usize = 50;
const REFINE_REL_TOL: f64 = 1e-10;
const UNIT_ROOT_MARGIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmaError {
    #[error("series of length {len} too short for this order: need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("singular regression while estimating ARMA({p}, {q})")]
    SingularRegression { p: usize, q: usize },
    #[error("history of length {len} insufficient: need at least {needed}")]
    InsufficientHistory { len: usize, needed: usize },
    #[error("model is not stationary (AR root modulus {min_root_modulus:.6} <= 1)")]
    NonStationary { min_root_modulus: f64 },
    #[error("forecast needs at least one step")]
    NoSteps,
    #[error("noise variance must be finite and non-negative, got {0}")]
    InvalidVariance(f64),
    #[error("information criterion needs n > p + q + 1 (n = {n}, p + q + 1 = {k})")]
    CriterionUndefined { n: usize, k: usize },
    #[error("every order in the grid failed to estimate")]
    AllOrdersFailed,
    #[error("non-finite value in input")]
    NonFinite,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaModel {
    pub p: usize,
    pub q: usize,
    /// `ψ_1..ψ_p`.
    pub ar_coeffs: Vec<f64>,
    /// `φ_1..φ_q`.
    pub ma_coeffs: Vec<f64>,
    pub mean: f64,
    pub noise_variance: f64,
}

impl ArmaModel {
    pub fn new(ar_coeffs: Vec<f64>, ma_coeffs: Vec<f64>, mean: f64, noise_variance: f64) -> Result<Self, ArmaError> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(ArmaError::InvalidVariance(noise_variance));
        }
        if !mean.is_finite() || ar_coeffs.iter().chain(&ma_coeffs).any(|c| !c.is_finite()) {
            return Err(ArmaError::NonFinite);
        }
        Ok(Self {
            p: ar_coeffs.len(),
            q: ma_coeffs.len(),
            ar_coeffs,
            ma_coeffs,
            mean,
            noise_variance,
        })
    }

    /// Mean-only model: `p = q = 0`.
    pub fn white_noise(mean: f64, noise_variance: f64) -> Result<Self, ArmaError> {
        Self::new(Vec::new(), Vec::new(), mean, noise_variance)
    }

    /// Coefficients of `Ψ(L)` on `L^0..L^p`, as printed: `[1, -ψ_1, …]`.
    pub fn ar_operator(&self) -> Vec<f64> {
        operator(&self.ar_coeffs)
    }

    /// Coefficients of `Φ(L)` on `L^0..L^q`.
    pub fn ma_operator(&self) -> Vec<f64> {
        operator(&self.ma_coeffs)
    }

    /// Conditional residuals of the mean-adjusted series `x`. Residuals
    /// before index `p` are zero.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        css_residuals(&self.ar_coeffs, &self.ma_coeffs, x)
    }

    /// Recursion on mean-adjusted state: `values` and `residuals` hold the
    /// most recent observations (oldest first); future shocks are zero.
    pub fn forecast_from_state(&self, values: &[f64], residuals: &[f64], steps: usize) -> Vec<f64> {
        let mut xs = values.to_vec();
        let mut es = residuals.to_vec();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let mut next = 0.0;
            for (s, psi) in self.ar_coeffs.iter().enumerate() {
                next += psi * xs[xs.len() - 1 - s];
            }
            for (s, phi) in self.ma_coeffs.iter().enumerate() {
                next -= phi * es[es.len() - 1 - s];
            }
            xs.push(next);
            es.push(0.0);
            out.push(next);
        }
        out
    }

    fn history_needed(&self) -> usize {
        self.p.max(self.q)
    }

    /// Forecast of `values[i]` for each `i` in `indices`, issued from origin
    /// `min(i - horizon, n - 1)`, so indices past the data are multi-step
    /// extensions of the last observation.
    pub fn ahead_forecasts(
        &self,
        values: &[f64],
        horizon: usize,
        indices: std::ops::Range<usize>,
    ) -> Result<Vec<f64>, ArmaError> {
        if horizon == 0 {
            return Err(ArmaError::NoSteps);
        }
        let adjusted: Vec<f64> = values.iter().map(|v| v - self.mean).collect();
        let residuals = self.residuals(&adjusted);
        let need = self.history_needed().max(1);
        let mut out = Vec::with_capacity(indices.len());
        for i in indices {
            let origin = match i.checked_sub(horizon) {
                Some(o) => o.min(values.len().saturating_sub(1)),
                None => return Err(ArmaError::InsufficientHistory { len: 0, needed: need }),
            };
            if origin + 1 < need || values.is_empty() {
                return Err(ArmaError::InsufficientHistory {
                    len: origin + 1,
                    needed: need,
                });
            }
            let steps = i - origin;
            let lo = origin + 1 - need;
            let f = self.forecast_from_state(&adjusted[lo..=origin], &residuals[lo..=origin], steps);
            out.push(f[steps - 1] + self.mean);
        }
        Ok(out)
    }
}

fn operator(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(1.0).chain(coeffs.iter().map(|c| -c)).collect()
}

/// Renders an operator as `1 - 0.9876 L - 0.1 L^2`.
pub fn format_operator(coeffs: &[f64]) -> String {
    let mut s = String::from("1");
    for (i, c) in coeffs.iter().enumerate() {
        let lag = if i == 0 { "L".to_string() } else { format!("L^{}", i + 1) };
        if *c >= 0.0 {
            s.push_str(&format!(" - {c} {lag}"));
        } else {
            s.push_str(&format!(" + {} {lag}", -c));
        }
    }
    s
}

impl fmt::Display for ArmaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ARMA({}, {}): Ψ(L) = {}, Φ(L) = {}, mean {}, σ² {}",
            self.p,
            self.q,
            format_operator(&self.ar_coeffs),
            format_operator(&self.ma_coeffs),
            self.mean,
            self.noise_variance
        )
    }
}

fn css_residuals(ar: &[f64], ma: &[f64], x: &[f64]) -> Vec<f64> {
    let p = ar.len();
    let mut e = vec![0.0; x.len()];
    for t in p..x.len() {
        let mut v = x[t];
        for (s, psi) in ar.iter().enumerate() {
            v -= psi * x[t - 1 - s];
        }
        for (s, phi) in ma.iter().enumerate() {
            if t > s {
                v += phi * e[t - 1 - s];
            }
        }
        e[t] = v;
    }
    e
}

fn css(ar: &[f64], ma: &[f64], x: &[f64]) -> f64 {
    css_residuals(ar, ma, x).iter().map(|e| e * e).sum()
}

/// Result of [`estimate_arma`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub model: ArmaModel,
    /// Conditional sum of squared residuals.
    pub css: f64,
    /// Residuals contributing to `css` (`n - p`).
    pub n_effective: usize,
    pub refine_iterations: usize,
    /// Set when refinement failed and the regression estimate was kept.
    pub warning: Option<String>,
}

fn min_length(p: usize, q: usize) -> usize {
    if p + q == 0 {
        2
    } else {
        10 * (p + q + 1)
    }
}

/// Regresses `x_t` on `x_{t-1..t-order}` for `t >= order`.
fn fit_long_ar(x: &[f64], order: usize) -> Option<Vec<f64>> {
    let rows = x.len() - order;
    let design = DMatrix::from_fn(rows, order, |i, j| x[order + i - 1 - j]);
    let rhs = DVector::from_iterator(rows, x[order..].iter().copied());
    linalg::least_squares(&design, &rhs).map(|b| b.iter().copied().collect())
}

/// Hannan-Rissanen style starting estimate `(ψ, φ)`.
fn initial_estimate(x: &[f64], p: usize, q: usize) -> Result<(Vec<f64>, Vec<f64>), ArmaError> {
    let n = x.len();
    let singular = ArmaError::SingularRegression { p, q };
    let (proxies, start) = if q == 0 {
        (vec![0.0; n], p)
    } else {
        let order = LONG_AR_MAX_ORDER.min(n / 4).max(p + q);
        let coeffs = fit_long_ar(x, order).ok_or(singular.clone())?;
        let mut e = vec![0.0; n];
        for t in order..n {
            e[t] = x[t] - coeffs.iter().enumerate().map(|(s, c)| c * x[t - 1 - s]).sum::<f64>();
        }
        (e, order + q)
    };
    let k = p + q;
    let rows = n.checked_sub(start).filter(|&r| r > k).ok_or(ArmaError::TooShort {
        len: n,
        needed: start + k + 1,
    })?;
    let design = DMatrix::from_fn(rows, k, |i, j| {
        let t = start + i;
        if j < p {
            x[t - 1 - j]
        } else {
            proxies[t - 1 - (j - p)]
        }
    });
    let rhs = DVector::from_iterator(rows, x[start..].iter().copied());
    let b = linalg::least_squares(&design, &rhs).ok_or(singular)?;
    let ar = b.iter().take(p).copied().collect();
    // The regression coefficient on a lagged shock is -φ.
    let ma = b.iter().skip(p).map(|c| -c).collect();
    Ok((ar, ma))
}

/// Residuals and their derivatives with respect to `(ψ, φ)`.
fn css_jacobian(ar: &[f64], ma: &[f64], x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let (p, q) = (ar.len(), ma.len());
    let k = p + q;
    let n = x.len();
    let e = css_residuals(ar, ma, x);
    let mut d = DMatrix::<f64>::zeros(n, k);
    for t in p..n {
        for j in 0..k {
            let mut v = if j < p {
                -x[t - 1 - j]
            } else {
                let lag = j - p + 1;
                if t >= lag {
                    e[t - lag]
                } else {
                    0.0
                }
            };
            for (s, phi) in ma.iter().enumerate() {
                if t > s {
                    v += phi * d[(t - 1 - s, j)];
                }
            }
            d[(t, j)] = v;
        }
    }
    let rows = n - p;
    (e[p..].to_vec(), d.rows(p, rows).into_owned())
}

/// Gauss-Newton on the conditional sum of squares.
fn refine(x: &[f64], ar: &[f64], ma: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    let p = ar.len();
    let mut beta: Vec<f64> = ar.iter().chain(ma).copied().collect();
    let mut current = css(ar, ma, x);
    let mut iterations = 0;
    while iterations < MAX_REFINE_ITERATIONS && current.is_finite() {
        iterations += 1;
        let (e, jac) = css_jacobian(&beta[..p], &beta[p..], x);
        if jac.iter().any(|v| !v.is_finite()) {
            break;
        }
        let rhs = -DVector::from_vec(e);
        let Some(delta) = linalg::least_squares(&jac, &rhs) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + step * d).collect();
            let value = css(&trial[..p], &trial[p..], x);
            if value.is_finite() && value < current {
                accepted = Some((trial, value));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            break;
        };
        let rel = (current - value) / current.max(f64::MIN_POSITIVE);
        beta = trial;
        current = value;
        if rel < REFINE_REL_TOL {
            break;
        }
    }
    (beta[..p].to_vec(), beta[p..].to_vec(), iterations)
}

/// Estimates an ARMA(p, q) model on `values` (the mean is removed first
/// and stored on the model).
pub fn estimate_arma(values: &[f64], p: usize, q: usize) -> Result<ArmaFit, ArmaError> {
    let n = values.len();
    let needed = min_length(p, q);
    if n < needed {
        return Err(ArmaError::TooShort { len: n, needed });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ArmaError::NonFinite);
    }
    let (x, mean) = series::mean_adjust(values)?;

    if p + q == 0 {
        let sse: f64 = x.iter().map(|v| v * v).sum();
        return Ok(ArmaFit {
            model: ArmaModel::white_noise(mean, sse / n as f64)?,
            css: sse,
            n_effective: n,
            refine_iterations: 0,
            warning: None,
        });
    }

    let (ar0, ma0) = initial_estimate(&x, p, q)?;
    let start_css = css(&ar0, &ma0, &x);
    // An explosive MA start makes the residual recursion overflow; restart
    // the polish from zero MA terms in that case.
    let (ar_start, ma_start) = if start_css.is_finite() {
        (ar0.clone(), ma0.clone())
    } else {
        (ar0.clone(), vec![0.0; q])
    };
    let (ar, ma, iterations) = refine(&x, &ar_start, &ma_start);
    let refined_css = css(&ar, &ma, &x);

    let (ar, ma, sse, warning) = if refined_css.is_finite() && (!start_css.is_finite() || refined_css <= start_css) {
        (ar, ma, refined_css, None)
    } else if start_css.is_finite() {
        (
            ar0,
            ma0,
            start_css,
            Some("conditional least-squares refinement diverged; regression estimate kept".to_string()),
        )
    } else {
        return Err(ArmaError::SingularRegression { p, q });
    };

    let n_effective = n - p;
    Ok(ArmaFit {
        model: ArmaModel::new(ar, ma, mean, sse / n_effective as f64)?,
        css: sse,
        n_effective,
        refine_iterations: iterations,
        warning,
    })
}

/// Multi-step forecast continuing `history` (physical units).
pub fn forecast_arma(model: &ArmaModel, history: &[f64], steps: usize) -> Result<Vec<f64>, ArmaError> {
    if steps == 0 {
        return Err(ArmaError::NoSteps);
    }
    let need = model.history_needed();
    if history.len() < need {
        return Err(ArmaError::InsufficientHistory {
            len: history.len(),
            needed: need,
        });
    }
    if history.is_empty() {
        return Ok(vec![model.mean; steps]);
    }
    let n = history.len();
    model.ahead_forecasts(history, 1, n..n + steps)
}

/// Simulates `n` samples with Gaussian shocks after a [`BURN_IN`] warm-up.
/// The mean is added back. Requires a stationary AR part.
pub fn simulate_arma(model: &ArmaModel, n: usize, seed: u64) -> Result<Vec<f64>, ArmaError> {
    let report = check_stationarity(model, StationarityMethod::UnitRoot);
    if !report.stationary {
        return Err(ArmaError::NonStationary {
            min_root_modulus: report.ar_root_moduli.first().copied().unwrap_or(0.0),
        });
    }
    let sigma = model.noise_variance.sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|_| ArmaError::InvalidVariance(model.noise_variance))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + BURN_IN;
    let mut x = vec![0.0; total];
    let mut e = vec![0.0; total];
    for t in 0..total {
        let shock = normal.sample(&mut rng);
        let mut v = shock;
        for (s, psi) in model.ar_coeffs.iter().enumerate() {
            if t > s {
                v += psi * x[t - 1 - s];
            }
        }
        for (s, phi) in model.ma_coeffs.iter().enumerate() {
            if t > s {
                v -= phi * e[t - 1 - s];
            }
        }
        e[t] = shock;
        x[t] = v;
    }
    Ok(x[BURN_IN..].iter().map(|v| v + model.mean).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum StationarityMethod {
    /// Every operator coefficient (ignoring the leading 1) below 1 in
    /// magnitude.
    CoefficientMagnitude,
    /// Every root of `Ψ(z)` strictly outside the unit circle.
    #[default]
    UnitRoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub method: StationarityMethod,
    pub stationary: bool,
    pub magnitude_criterion: bool,
    pub unit_root_criterion: bool,
    /// Largest |ψ_s| or |φ_s|.
    pub max_abs_coefficient: f64,
    /// Moduli of the roots of `Ψ(z)`, ascending.
    pub ar_root_moduli: Vec<f64>,
    /// Moduli of the roots of `Φ(z)`, ascending (invertibility diagnostic).
    pub ma_root_moduli: Vec<f64>,
}

/// Moduli of the roots of `1 - Σ c_s z^s`, ascending.
pub fn lag_polynomial_root_moduli(coeffs: &[f64]) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let m = c.len();
    if m == 0 {
        return Vec::new();
    }
    // Companion matrix of z^m - c_1 z^(m-1) - … - c_m; its eigenvalues are
    // the reciprocals of the lag-polynomial roots.
    let companion = DMatrix::from_fn(m, m, |i, j| if i == 0 { c[j] } else if i == j + 1 { 1.0 } else { 0.0 });
    let mut moduli: Vec<f64> = companion
        .complex_eigenvalues()
        .iter()
        .map(|lambda| 1.0 / lambda.norm())
        .collect();
    moduli.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    moduli
}

pub fn check_stationarity(model: &ArmaModel, method: StationarityMethod) -> StationarityReport {
    let max_abs_coefficient = model
        .ar_coeffs
        .iter()
        .chain(&model.ma_coeffs)
        .map(|c| c.abs())
        .fold(0.0, f64::max);
    let magnitude_criterion = max_abs_coefficient < 1.0;
    let ar_root_moduli = lag_polynomial_root_moduli(&model.ar_coeffs);
    let unit_root_criterion = ar_root_moduli.iter().all(|&r| r > 1.0 + UNIT_ROOT_MARGIN);
    StationarityReport {
        method,
        stationary: match method {
            StationarityMethod::CoefficientMagnitude => magnitude_criterion,
            StationarityMethod::UnitRoot => unit_root_criterion,
        },
        magnitude_criterion,
        unit_root_criterion,
        max_abs_coefficient,
        ar_root_moduli,
        ma_root_moduli: lag_polynomial_root_moduli(&model.ma_coeffs),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Aic,
    Mdl,
}

/// `n ln(σ̂²) + 2k` (AIC) or `n ln(σ̂²) + k ln n` (MDL) with `k = p + q + 1`
/// and `σ̂² = sse / n`. A zero SSE yields `-∞`.
pub fn information_criterion(model: &ArmaModel, residual_sse: f64, n: usize, kind: Criterion) -> Result<f64, ArmaError> {
    let k = model.p + model.q + 1;
    if n <= k {
        return Err(ArmaError::CriterionUndefined { n, k });
    }
    if !(residual_sse >= 0.0) || !residual_sse.is_finite() {
        return Err(ArmaError::NonFinite);
    }
    if residual_sse == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nf = n as f64;
    let fit = nf * (residual_sse / nf).ln();
    Ok(match kind {
        Criterion::Aic => fit + 2.0 * k as f64,
        Criterion::Mdl => fit + k as f64 * nf.ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub p: usize,
    pub q: usize,
    pub aic: f64,
    pub mdl: f64,
    pub noise_variance: f64,
    /// Zero residual SSE: both criteria are `-∞`.
    pub perfect_fit: bool,
}

impl OrderScore {
    pub fn score(&self, kind: Criterion) -> f64 {
        match kind {
            Criterion::Aic => self.aic,
            Criterion::Mdl => self.mdl,
        }
    }
}

/// Estimates every `(p, q)` in `0..=p_max × 0..=q_max` and keeps the
/// criterion minimiser; ties go to the smaller `p + q`, then smaller `p`.
/// Orders that fail to estimate are left out of the grid.
pub fn select_order(
    values: &[f64],
    p_max: usize,
    q_max: usize,
    kind: Criterion,
) -> Result<(ArmaFit, Vec<OrderScore>), ArmaError> {
    let grid: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();
    let fits: Vec<(ArmaFit, OrderScore)> = grid
        .par_iter()
        .filter_map(|&(p, q)| {
            let fit = estimate_arma(values, p, q).ok()?;
            let aic = information_criterion(&fit.model, fit.css, fit.n_effective, Criterion::Aic).ok()?;
            let mdl = information_criterion(&fit.model, fit.css, fit.n_effective, Criterion::Mdl).ok()?;
            let score = OrderScore {
                p,
                q,
                aic,
                mdl,
                noise_variance: fit.model.noise_variance,
                perfect_fit: fit.css == 0.0,
            };
            Some((fit, score))
        })
        .collect();
    let best = fits
        .iter()
        .min_by(|a, b| {
            a.1.score(kind)
                .partial_cmp(&b.1.score(kind))
                .unwrap_or(Ordering::Equal)
                .then((a.1.p + a.1.q).cmp(&(b.1.p + b.1.q)))
                .then(a.1.p.cmp(&b.1.p))
        })
        .map(|(fit, _)| fit.clone())
        .ok_or(ArmaError::AllOrdersFailed)?;
    Ok((best, fits.into_iter().map(|(_, s)| s).collect()))
}

/// ARMA model on the `d`-times differenced series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    /// Its mean is the drift of the differenced series.
    pub inner: ArmaModel,
    pub d: usize,
    /// Leading value dropped at each differencing level of the training data.
    pub seed_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaFit {
    pub model: ArimaModel,
    pub css: f64,
    pub n_effective: usize,
    pub refine_iterations: usize,
    pub warning: Option<String>,
}

pub fn fit_arima(values: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaFit, ArmaError> {
    let (diffed, seeds) = series::difference(values, d)?;
    let fit = estimate_arma(&diffed, p, q)?;
    Ok(ArimaFit {
        model: ArimaModel {
            inner: fit.model,
            d,
            seed_values: seeds,
        },
        css: fit.css,
        n_effective: fit.n_effective,
        refine_iterations: fit.refine_iterations,
        warning: fit.warning,
    })
}

impl ArimaModel {
    /// As [`ArmaModel::ahead_forecasts`], working in differenced space and
    /// integrating back from the observed levels at each origin.
    pub fn ahead_forecasts(
        &self,
        values: &[f64],
        horizon: usize,
        indices: std::ops::Range<usize>,
    ) -> Result<Vec<f64>, ArmaError> {
        if horizon == 0 {
            return Err(ArmaError::NoSteps);
        }
        let d = self.d;
        let n = values.len();
        if n <= d {
            return Err(ArmaError::InsufficientHistory { len: n, needed: d + 1 });
        }
        // levels[k] is the k-times differenced series; levels[k][j] sits at
        // original index j + k.
        let mut levels = vec![values.to_vec()];
        for _ in 0..d {
            let last = levels.last().expect("level 0 exists");
            let next = last.windows(2).map(|w| w[1] - w[0]).collect();
            levels.push(next);
        }
        let inner = &self.inner;
        let diffed = &levels[d];
        let adjusted: Vec<f64> = diffed.iter().map(|v| v - inner.mean).collect();
        let residuals = inner.residuals(&adjusted);
        let need = inner.history_needed().max(1);

        let mut out = Vec::with_capacity(indices.len());
        for i in indices {
            let origin = i
                .checked_sub(horizon)
                .map(|o| o.min(n - 1))
                .ok_or(ArmaError::InsufficientHistory { len: 0, needed: need + d })?;
            if origin < d || origin - d + 1 < need {
                return Err(ArmaError::InsufficientHistory {
                    len: origin + 1,
                    needed: need + d,
                });
            }
            let steps = i - origin;
            let od = origin - d;
            let lo = od + 1 - need;
            let mut path: Vec<f64> = inner
                .forecast_from_state(&adjusted[lo..=od], &residuals[lo..=od], steps)
                .into_iter()
                .map(|v| v + inner.mean)
                .collect();
            for k in (0..d).rev() {
                let mut acc = levels[k][origin - k];
                for v in path.iter_mut() {
                    acc += *v;
                    *v = acc;
                }
            }
            out.push(path[steps - 1]);
        }
        Ok(out)
    }
}

/// Multi-step ARIMA forecast continuing `history`.
pub fn forecast_arima(model: &ArimaModel, history: &[f64], steps: usize) -> Result<Vec<f64>, ArmaError> {
    if steps == 0 {
        return Err(ArmaError::NoSteps);
    }
    let n = history.len();
    model.ahead_forecasts(history, 1, n..n + steps)
}
