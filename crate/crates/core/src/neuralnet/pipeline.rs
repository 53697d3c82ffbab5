//! Scale, window, train and predict: the end-to-end network forecaster.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{init_network, train, Activation, Layer, MlpNetwork, NetError, NetworkConfig, Samples, StopReason, TrainParams, TrainReport, Trainer};
use crate::series::{self, ScalingParams, TimeSeries};

/// A network architecture plus its training recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpRecipe {
    pub num_lags: usize,
    pub hidden_layer_sizes: Vec<usize>,
    /// Hidden layers first, output layer last.
    pub activations: Vec<Activation>,
    #[serde(default)]
    pub train: TrainParams,
}

impl MlpRecipe {
    pub fn config(&self, seed: u64) -> NetworkConfig {
        NetworkConfig {
            input_size: self.num_lags,
            hidden_layer_sizes: self.hidden_layer_sizes.clone(),
            output_size: 1,
            activations: self.activations.clone(),
            seed,
        }
    }
}

/// Default networks for the 3, 6 and 12 hour tasks. The first
/// listed transfer function applies to the first computational layer.
pub fn recipe_for_horizon(hours: u32) -> Option<MlpRecipe> {
    let (hidden, activations, algorithm) = match hours {
        3 => (vec![3], vec![Activation::Identity, Activation::Logistic], Trainer::LevenbergMarquardt),
        6 => (vec![5], vec![Activation::Tanh, Activation::Identity], Trainer::LevenbergMarquardt),
        12 => (
            vec![3, 1],
            vec![Activation::Logistic, Activation::Logistic, Activation::Logistic],
            Trainer::ScaledConjugateGradient,
        ),
        _ => return None,
    };
    Some(MlpRecipe {
        num_lags: 2,
        hidden_layer_sizes: hidden,
        activations,
        train: TrainParams {
            algorithm,
            ..TrainParams::default()
        },
    })
}

/// Per-trial seed: SplitMix64 over the base seed and trial index.
pub fn derive_seed(base: u64, trial: usize) -> u64 {
    let mut z = base ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub network: MlpNetwork,
    pub scaling: ScalingParams,
    pub report: TrainReport,
    /// Initialisation seed of the retained trial.
    pub seed: u64,
    /// Selection score of every trial (validation MSE, or training MSE
    /// without a validation split), in trial order.
    pub trial_scores: Vec<f64>,
    /// Forecasts for every test point, m/s.
    pub predictions: Vec<f64>,
}

/// Network forecasts of `values[i]` for `i` in `indices`, each from the
/// `num_lags` values ending `horizon` steps earlier (physical units).
pub fn predict_indices(
    network: &MlpNetwork,
    scaling: &ScalingParams,
    values: &[f64],
    horizon: usize,
    indices: std::ops::Range<usize>,
) -> Result<Vec<f64>, NetError> {
    let num_lags = network.input_size();
    let scaled: Vec<f64> = values.iter().map(|&v| scaling.apply(v)).collect();
    let out = series::lagged_forecasts(&scaled, num_lags, horizon, indices, |window| {
        network.forward(window).map(|y| y[0]).unwrap_or(f64::NAN)
    })?;
    Ok(out.into_iter().map(|u| scaling.invert(u)).collect())
}

/// Network reproducing a constant `value` exactly: zero weights and an
/// output bias at the pre-image of the scaled target midpoint.
fn constant_network(config: &NetworkConfig, target_range: (f64, f64), value: f64) -> Result<(MlpNetwork, ScalingParams), NetError> {
    let mut net = init_network(config)?;
    let n = net.param_count();
    net.set_params(&vec![0.0; n])?;
    let mid = 0.5 * (target_range.0 + target_range.1);
    let last: &mut Layer = net.layers.last_mut().expect("output layer");
    last.biases[0] = match last.activation {
        Activation::Logistic => (mid / (1.0 - mid)).ln(),
        Activation::Tanh => mid.atanh(),
        Activation::Identity => mid,
    };
    let half = 0.5 * (target_range.1 - target_range.0);
    // Scaler with unit gain centred on the constant.
    let scaling = ScalingParams::new(value - half, value + half, target_range.0, target_range.1)?;
    Ok((net, scaling))
}

/// Scales both splits with the training range, trains on the training
/// windows and forecasts every test point `horizon_steps` ahead.
pub fn fit_predict_pipeline(
    train_series: &TimeSeries,
    test_series: &TimeSeries,
    config: &NetworkConfig,
    params: &TrainParams,
    horizon_steps: usize,
    num_lags: usize,
    target_range: (f64, f64),
) -> Result<PipelineOutput, NetError> {
    config.validate()?;
    params.validate()?;
    if num_lags != config.input_size {
        return Err(NetError::InvalidConfig(format!(
            "num_lags {num_lags} differs from input size {}",
            config.input_size
        )));
    }
    if config.output_size != 1 {
        return Err(NetError::InvalidConfig("forecasting networks have a single output".into()));
    }

    let n_train = train_series.len();
    let values: Vec<f64> = train_series.iter().chain(test_series.iter()).collect();
    let test_indices = n_train..values.len();

    let first = train_series.values[0];
    if train_series.iter().all(|v| v == first) {
        let (network, scaling) = constant_network(config, target_range, first)?;
        let predictions = predict_indices(&network, &scaling, &values, horizon_steps, test_indices)?;
        return Ok(PipelineOutput {
            network,
            scaling,
            report: TrainReport {
                epochs_run: 0,
                final_train_mse: 0.0,
                train_mse_history: vec![],
                validation_mse_history: vec![],
                best_validation_mse: None,
                stop_reason: StopReason::Goal,
            },
            seed: config.seed,
            trial_scores: vec![],
            predictions,
        });
    }

    let scaling = series::fit_scaler(&train_series.values, target_range.0, target_range.1)?;
    let scaled: Vec<f64> = train_series.iter().map(|v| scaling.apply(v)).collect();
    let set = series::make_supervised(&scaled, num_lags, horizon_steps)?;
    let samples = Samples::from_supervised(&set);

    let seeds: Vec<u64> = if params.trials == 1 {
        vec![config.seed]
    } else {
        (0..params.trials).map(|k| derive_seed(config.seed, k)).collect()
    };
    let trials: Vec<Result<(MlpNetwork, TrainReport, u64), NetError>> = seeds
        .par_iter()
        .map(|&seed| {
            let cfg = NetworkConfig { seed, ..config.clone() };
            let net = init_network(&cfg)?;
            let (net, report) = train(&net, &samples, params)?;
            Ok((net, report, seed))
        })
        .collect();

    let score = |r: &TrainReport| r.best_validation_mse.unwrap_or(r.final_train_mse);
    let mut trial_scores = Vec::with_capacity(trials.len());
    let mut best: Option<(MlpNetwork, TrainReport, u64)> = None;
    let mut first_err = None;
    for t in trials {
        match t {
            Ok((net, report, seed)) => {
                let s = score(&report);
                trial_scores.push(s);
                if best.as_ref().is_none_or(|b| s < score(&b.1)) {
                    best = Some((net, report, seed));
                }
            }
            Err(e) => {
                trial_scores.push(f64::INFINITY);
                first_err.get_or_insert(e);
            }
        }
    }
    let Some((network, report, seed)) = best else {
        return Err(first_err.unwrap_or(NetError::EmptyDataset));
    };

    let predictions = predict_indices(&network, &scaling, &values, horizon_steps, test_indices)?;
    Ok(PipelineOutput {
        network,
        scaling,
        report,
        seed,
        trial_scores,
        predictions,
    })
}
