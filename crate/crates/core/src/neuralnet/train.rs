//! Full-batch trainers sharing one epoch loop.
//!
//! Each epoch records the training MSE, stops on the goal, checks the
//! validation split (the chronological tail of the training pairs) for
//! early stopping, then lets the trainer take one step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{MlpNetwork, NetError, Samples};

/// MSE above which training is declared divergent.
pub const DIVERGENCE_MSE: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Trainer {
    #[serde(rename = "traingd")]
    GradientDescent,
    #[default]
    #[serde(rename = "trainlm")]
    LevenbergMarquardt,
    #[serde(rename = "trainscg")]
    ScaledConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub algorithm: Trainer,
    pub max_epochs: usize,
    pub goal_mse: f64,
    pub mu_init: f64,
    pub mu_inc: f64,
    pub mu_dec: f64,
    pub mu_max: f64,
    pub learning_rate: f64,
    /// Trailing share of the training pairs held out for early stopping.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Base seed for multi-start trials.
    pub seed: u64,
    /// Independent initialisations tried; the best validation score wins.
    pub trials: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            algorithm: Trainer::LevenbergMarquardt,
            max_epochs: 1000,
            goal_mse: 0.0,
            mu_init: 1e-3,
            mu_inc: 10.0,
            mu_dec: 0.1,
            mu_max: 1e10,
            learning_rate: 0.01,
            validation_fraction: 0.15,
            patience: 6,
            seed: 0,
            trials: 1,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |what: &str| Err(NetError::InvalidParams(what.to_string()));
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.goal_mse >= 0.0) {
            return bad("goal_mse must be non-negative");
        }
        if !(self.mu_init > 0.0 && self.mu_inc > 1.0 && self.mu_dec > 0.0 && self.mu_dec < 1.0 && self.mu_max > self.mu_init) {
            return bad("damping schedule needs mu_init > 0, mu_inc > 1, 0 < mu_dec < 1, mu_max > mu_init");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 0.5]");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Goal,
    Patience,
    MaxEpochs,
    DampingCeiling,
    /// Gradient vanished; no descent direction remains.
    MinGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_train_mse: f64,
    /// Training MSE at the start of each epoch.
    pub train_mse_history: Vec<f64>,
    /// Validation MSE at the start of each epoch; empty without a
    /// validation split.
    pub validation_mse_history: Vec<f64>,
    pub best_validation_mse: Option<f64>,
    pub stop_reason: StopReason,
}

enum Step {
    Moved,
    Stalled,
    Stop(StopReason),
}

fn check_targets(net: &MlpNetwork, data: &Samples) -> Result<(), NetError> {
    let activation = net.output_activation();
    if let Some((lo, hi)) = activation.output_range() {
        for &value in data.targets.iter().flatten() {
            if !(value > lo && value < hi) {
                return Err(NetError::TargetOutOfRange {
                    value,
                    lo,
                    hi,
                    activation,
                });
            }
        }
    }
    Ok(())
}

fn run<F>(network: &MlpNetwork, data: &Samples, params: &TrainParams, mut step: F) -> Result<(MlpNetwork, TrainReport), NetError>
where
    F: FnMut(&mut MlpNetwork, &Samples, f64) -> Result<Step, NetError>,
{
    params.validate()?;
    if data.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    check_targets(network, data)?;
    let (train, validation) = if params.validation_fraction > 0.0 {
        data.split_tail(params.validation_fraction)
    } else {
        (data.clone(), Samples { inputs: vec![], targets: vec![] })
    };
    if train.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    let use_validation = !validation.is_empty();

    let mut net = network.clone();
    let mut train_hist = Vec::new();
    let mut val_hist = Vec::new();
    let mut best: Option<(f64, MlpNetwork)> = None;
    let mut since_best = 0;
    let mut stop = StopReason::MaxEpochs;

    for _ in 0..params.max_epochs {
        let mse = net.mse(&train)?;
        train_hist.push(mse);
        if !mse.is_finite() || mse > DIVERGENCE_MSE {
            return Err(NetError::Diverged {
                report: Box::new(TrainReport {
                    epochs_run: train_hist.len(),
                    final_train_mse: mse,
                    train_mse_history: train_hist,
                    validation_mse_history: val_hist,
                    best_validation_mse: best.map(|b| b.0),
                    stop_reason: StopReason::MaxEpochs,
                }),
            });
        }
        if use_validation {
            let vmse = net.mse(&validation)?;
            val_hist.push(vmse);
            match &best {
                Some((b, _)) if vmse >= *b => since_best += 1,
                _ => {
                    best = Some((vmse, net.clone()));
                    since_best = 0;
                }
            }
        }
        if mse <= params.goal_mse {
            stop = StopReason::Goal;
            break;
        }
        if since_best >= params.patience {
            stop = StopReason::Patience;
            break;
        }
        match step(&mut net, &train, mse)? {
            Step::Moved | Step::Stalled => {}
            Step::Stop(reason) => {
                stop = reason;
                break;
            }
        }
    }

    // Training stops on the best-validation weights when a split exists.
    let best_validation_mse = best.as_ref().map(|b| b.0);
    if let Some((_, best_net)) = best {
        if stop != StopReason::Goal {
            net = best_net;
        }
    }
    let final_train_mse = net.mse(&train)?;
    if !final_train_mse.is_finite() || final_train_mse > DIVERGENCE_MSE {
        return Err(NetError::Diverged {
            report: Box::new(TrainReport {
                epochs_run: train_hist.len(),
                final_train_mse,
                train_mse_history: train_hist,
                validation_mse_history: val_hist,
                best_validation_mse,
                stop_reason: stop,
            }),
        });
    }
    Ok((
        net,
        TrainReport {
            epochs_run: train_hist.len(),
            final_train_mse,
            train_mse_history: train_hist,
            validation_mse_history: val_hist,
            best_validation_mse,
            stop_reason: stop,
        },
    ))
}

/// Full-batch steepest descent on `½ SSE`: `w ← w - η ∇`.
pub fn train_gd(network: &MlpNetwork, data: &Samples, params: &TrainParams) -> Result<(MlpNetwork, TrainReport), NetError> {
    let eta = params.learning_rate;
    run(network, data, params, |net, train, _| {
        let g = net.gradient(train)?;
        if g.iter().all(|&v| v == 0.0) {
            return Ok(Step::Stop(StopReason::MinGradient));
        }
        let w: Vec<f64> = net.params().iter().zip(&g).map(|(w, g)| w - eta * g).collect();
        net.set_params(&w)?;
        Ok(Step::Moved)
    })
}

/// Levenberg-Marquardt: solve `(JᵀJ + μI) Δ = Jᵀe` and accept the step
/// only if the SSE drops, shrinking μ on success and growing it otherwise.
pub fn train_lm(network: &MlpNetwork, data: &Samples, params: &TrainParams) -> Result<(MlpNetwork, TrainReport), NetError> {
    let mut mu = params.mu_init;
    run(network, data, params, |net, train, mse| {
        let sse = mse * (train.len() * net.output_size()) as f64;
        let (errors, jac) = net.jacobian(train)?;
        let np = net.param_count();
        let rows = errors.len();
        let j = DMatrix::from_row_slice(rows, np, &jac);
        let e = DVector::from_vec(errors);
        let jtj = j.transpose() * &j;
        let jte = j.transpose() * e;
        let w = net.params();
        loop {
            let mut a = jtj.clone();
            for i in 0..np {
                a[(i, i)] += mu;
            }
            let delta = a.cholesky().map(|c| c.solve(&jte));
            if let Some(delta) = delta.filter(|d| d.iter().all(|v| v.is_finite())) {
                let trial: Vec<f64> = w.iter().zip(delta.iter()).map(|(w, d)| w + d).collect();
                net.set_params(&trial)?;
                let new_sse = net.sse(train)?;
                if new_sse < sse {
                    mu *= params.mu_dec;
                    return Ok(Step::Moved);
                }
                net.set_params(&w)?;
            }
            mu *= params.mu_inc;
            if mu > params.mu_max {
                return Ok(Step::Stop(StopReason::DampingCeiling));
            }
        }
    })
}

/// State of the scaled conjugate gradient iteration.
struct Scg {
    direction: Vec<f64>,
    residual: Vec<f64>,
    lambda: f64,
    lambda_bar: f64,
    success: bool,
    delta: f64,
    iteration: usize,
    initialised: bool,
}

const SCG_SIGMA: f64 = 1e-4;
const SCG_LAMBDA: f64 = 1e-6;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scaled conjugate gradient: conjugate directions with a finite-difference
/// curvature estimate along the direction and a scalar damping λ driven by
/// the agreement Δ between predicted and actual decrease. No line search.
pub fn train_scg(network: &MlpNetwork, data: &Samples, params: &TrainParams) -> Result<(MlpNetwork, TrainReport), NetError> {
    let mut st = Scg {
        direction: Vec::new(),
        residual: Vec::new(),
        lambda: SCG_LAMBDA,
        lambda_bar: 0.0,
        success: true,
        delta: 0.0,
        iteration: 0,
        initialised: false,
    };
    let np = network.param_count();
    run(network, data, params, |net, train, mse| {
        let energy = 0.5 * mse * (train.len() * net.output_size()) as f64;
        let w = net.params();
        if !st.initialised {
            st.residual = net.gradient(train)?.iter().map(|g| -g).collect();
            st.direction = st.residual.clone();
            st.initialised = true;
        }
        let p_sq = dot(&st.direction, &st.direction);
        if p_sq == 0.0 || dot(&st.residual, &st.residual) <= f64::MIN_POSITIVE {
            return Ok(Step::Stop(StopReason::MinGradient));
        }
        let p_norm = p_sq.sqrt();

        if st.success {
            let sigma = SCG_SIGMA / p_norm;
            let shifted: Vec<f64> = w.iter().zip(&st.direction).map(|(w, p)| w + sigma * p).collect();
            net.set_params(&shifted)?;
            let g_shift = net.gradient(train)?;
            net.set_params(&w)?;
            // -r is the gradient at w.
            let s: Vec<f64> = g_shift.iter().zip(&st.residual).map(|(g, r)| (g + r) / sigma).collect();
            st.delta = dot(&st.direction, &s);
        }

        st.delta += (st.lambda - st.lambda_bar) * p_sq;
        if st.delta <= 0.0 {
            st.lambda_bar = 2.0 * (st.lambda - st.delta / p_sq);
            st.delta = -st.delta + st.lambda * p_sq;
            st.lambda = st.lambda_bar;
        }

        let mu = dot(&st.direction, &st.residual);
        let alpha = mu / st.delta;
        let trial: Vec<f64> = w.iter().zip(&st.direction).map(|(w, p)| w + alpha * p).collect();
        net.set_params(&trial)?;
        let trial_energy = 0.5 * net.sse(train)?;
        let comparison = if mu != 0.0 && trial_energy.is_finite() {
            2.0 * st.delta * (energy - trial_energy) / (mu * mu)
        } else {
            -1.0
        };

        let outcome = if comparison >= 0.0 {
            st.iteration += 1;
            let new_residual: Vec<f64> = net.gradient(train)?.iter().map(|g| -g).collect();
            st.lambda_bar = 0.0;
            st.success = true;
            if st.iteration.is_multiple_of(np) {
                st.direction = new_residual.clone();
            } else {
                let beta = (dot(&new_residual, &new_residual) - dot(&new_residual, &st.residual)) / mu;
                st.direction = new_residual.iter().zip(&st.direction).map(|(r, p)| r + beta * p).collect();
            }
            st.residual = new_residual;
            if comparison >= 0.75 {
                st.lambda *= 0.25;
            }
            Step::Moved
        } else {
            net.set_params(&w)?;
            st.lambda_bar = st.lambda;
            st.success = false;
            Step::Stalled
        };
        if comparison < 0.25 {
            st.lambda += st.delta * (1.0 - comparison) / p_sq;
        }
        Ok(outcome)
    })
}

/// Dispatches on `params.algorithm`.
pub fn train(network: &MlpNetwork, data: &Samples, params: &TrainParams) -> Result<(MlpNetwork, TrainReport), NetError> {
    match params.algorithm {
        Trainer::GradientDescent => train_gd(network, data, params),
        Trainer::LevenbergMarquardt => train_lm(network, data, params),
        Trainer::ScaledConjugateGradient => train_scg(network, data, params),
    }
}
