//! The `model.json` artifact and prediction from it.

use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use windcast::arma::{format_operator, ArimaModel, ArmaModel};
use windcast::neuralnet::{init_network, predict_indices, Activation, MlpNetwork, NetworkConfig, Trainer};
use windcast::polyfit::{eval_polynomial, PolynomialModel};
use windcast::series::lagged_forecasts;
use windcast::ScalingParams;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub horizon_hours: u32,
    pub horizon_steps: usize,
    pub step_seconds: i64,
    pub num_lags: usize,
    /// Training samples; forecasts start here by default.
    pub train_len: usize,
    #[serde(flatten)]
    pub model: FittedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FittedModel {
    Polynomial {
        degree: usize,
        /// Ascending powers.
        coefficients: Vec<f64>,
    },
    Arma {
        ar_operator: String,
        ma_operator: String,
        model: ArmaModel,
    },
    Arima {
        ar_operator: String,
        ma_operator: String,
        model: ArimaModel,
    },
    Mlp {
        /// Inputs, hidden layers, output.
        topology: Vec<usize>,
        hidden_layer_sizes: Vec<usize>,
        activations: Vec<Activation>,
        trainer: Trainer,
        seed: u64,
        scaling: ScalingParams,
        /// Per layer: weights row by row, then biases.
        params: Vec<f64>,
    },
}

impl FittedModel {
    pub fn family(&self) -> &'static str {
        match self {
            FittedModel::Polynomial { .. } => "polynomial",
            FittedModel::Arma { .. } => "arma",
            FittedModel::Arima { .. } => "arima",
            FittedModel::Mlp { .. } => "mlp",
        }
    }

    pub fn arma(model: ArmaModel) -> Self {
        FittedModel::Arma {
            ar_operator: format_operator(&model.ar_coeffs),
            ma_operator: format_operator(&model.ma_coeffs),
            model,
        }
    }

    pub fn arima(model: ArimaModel) -> Self {
        FittedModel::Arima {
            ar_operator: format_operator(&model.inner.ar_coeffs),
            ma_operator: format_operator(&model.inner.ma_coeffs),
            model,
        }
    }

    pub fn mlp(network: &MlpNetwork, trainer: Trainer, seed: u64, scaling: ScalingParams) -> Self {
        let mut topology = vec![network.input_size()];
        topology.extend(network.layers.iter().map(|l| l.outputs));
        FittedModel::Mlp {
            hidden_layer_sizes: topology[1..topology.len() - 1].to_vec(),
            topology,
            activations: network.layers.iter().map(|l| l.activation).collect(),
            trainer,
            seed,
            scaling,
            params: network.params(),
        }
    }
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| schema(format!("invalid JSON: {e}")))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(schema(format!("unsupported schema_version {v}"))),
            None => return Err(schema("missing schema_version")),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
        file.check()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.horizon_steps == 0 || self.step_seconds <= 0 || self.num_lags == 0 {
            return Err(schema("horizon_steps, step_seconds and num_lags must be positive"));
        }
        match &self.model {
            FittedModel::Polynomial { degree, coefficients } => {
                if coefficients.len() != degree + 1 {
                    return Err(schema(format!("degree {degree} needs {} coefficients", degree + 1)));
                }
                if self.num_lags != 1 {
                    return Err(schema("polynomial models use a single lag"));
                }
            }
            FittedModel::Mlp { topology, .. } => {
                if topology.first() != Some(&self.num_lags) {
                    return Err(schema("network input size differs from num_lags"));
                }
                self.network()?;
            }
            FittedModel::Arma { .. } | FittedModel::Arima { .. } => {}
        }
        Ok(())
    }

    fn network(&self) -> Result<MlpNetwork, CliError> {
        let FittedModel::Mlp {
            topology,
            activations,
            params,
            ..
        } = &self.model
        else {
            return Err(schema("not a network model"));
        };
        if topology.len() < 2 {
            return Err(schema("topology needs an input and an output layer"));
        }
        let config = NetworkConfig {
            input_size: topology[0],
            hidden_layer_sizes: topology[1..topology.len() - 1].to_vec(),
            output_size: topology[topology.len() - 1],
            activations: activations.clone(),
            seed: 0,
        };
        let mut net = init_network(&config).map_err(|e| schema(e.to_string()))?;
        net.set_params(params).map_err(|e| schema(e.to_string()))?;
        Ok(net)
    }

    /// Forecasts of `values[i]` for `i` in `indices`, each issued
    /// `horizon_steps` earlier; indices past the data extend recursively.
    pub fn predict(&self, values: &[f64], indices: Range<usize>) -> Result<Vec<f64>, CliError> {
        let h = self.horizon_steps;
        let out = match &self.model {
            FittedModel::Polynomial { degree, coefficients } => {
                let poly = PolynomialModel {
                    degree: *degree,
                    coefficients: coefficients.clone(),
                    horizon_steps: h,
                    train_mse: f64::NAN,
                    train_r: None,
                };
                lagged_forecasts(values, 1, h, indices, |w| eval_polynomial(&poly, w[0]))
                    .map_err(windcast::Error::from)?
            }
            FittedModel::Arma { model, .. } => model.ahead_forecasts(values, h, indices).map_err(windcast::Error::from)?,
            FittedModel::Arima { model, .. } => model.ahead_forecasts(values, h, indices).map_err(windcast::Error::from)?,
            FittedModel::Mlp { scaling, .. } => {
                let net = self.network()?;
                predict_indices(&net, scaling, values, h, indices).map_err(windcast::Error::from)?
            }
        };
        Ok(out)
    }
}
