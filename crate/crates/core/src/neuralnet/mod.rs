//! Fully connected feedforward networks.
//!
//! Each computational neuron `k` forms `S = Σ_j w_kj x_j + θ_k` and emits
//! `f(S)` for its layer's activation `f`. Parameters flatten layer by layer:
//! the weight matrix row by row (neuron, then source), then the biases.

mod pipeline;
mod train;

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::SeriesError;

pub use pipeline::{derive_seed, fit_predict_pipeline, predict_indices, recipe_for_horizon, MlpRecipe, PipelineOutput};
pub use train::{
    train, train_gd, train_lm, train_scg, StopReason, TrainParams, TrainReport, Trainer,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("target {value} outside the ({lo}, {hi}) output range of the {activation} output layer")]
    TargetOutOfRange {
        value: f64,
        lo: f64,
        hi: f64,
        activation: Activation,
    },
    #[error("training diverged after {} epochs (MSE {})", .report.epochs_run, .report.final_train_mse)]
    Diverged { report: Box<TrainReport> },
    #[error("damped system singular at the damping ceiling")]
    SingularSystem,
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Neuron transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    /// `1 / (1 + e^-s)`.
    #[serde(rename = "logsig")]
    Logistic,
    #[serde(rename = "tansig")]
    Tanh,
    #[serde(rename = "purelin", alias = "purelm")]
    Identity,
}

impl Activation {
    pub fn apply(self, s: f64) -> f64 {
        match self {
            Activation::Logistic => 1.0 / (1.0 + (-s).exp()),
            Activation::Tanh => s.tanh(),
            Activation::Identity => s,
        }
    }

    /// Derivative expressed through the neuron output `a = f(s)`.
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Logistic => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }

    /// Open output interval, if bounded.
    pub fn output_range(self) -> Option<(f64, f64)> {
        match self {
            Activation::Logistic => Some((0.0, 1.0)),
            Activation::Tanh => Some((-1.0, 1.0)),
            Activation::Identity => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Logistic => "logsig",
            Activation::Tanh => "tansig",
            Activation::Identity => "purelin",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logsig" | "logistic" | "sigmoid" => Ok(Activation::Logistic),
            "tansig" | "tanh" => Ok(Activation::Tanh),
            "purelin" | "purelm" | "identity" | "linear" => Ok(Activation::Identity),
            other => Err(NetError::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

pub fn apply_activation(kind: Activation, s: f64) -> f64 {
    kind.apply(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_size: usize,
    pub hidden_layer_sizes: Vec<usize>,
    pub output_size: usize,
    /// One per computational layer: hidden layers, then the output layer.
    pub activations: Vec<Activation>,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_size == 0 || self.output_size == 0 || self.hidden_layer_sizes.contains(&0) {
            return Err(NetError::InvalidConfig("layer sizes must be at least 1".into()));
        }
        if self.activations.len() != self.hidden_layer_sizes.len() + 1 {
            return Err(NetError::InvalidConfig(format!(
                "{} activations given for {} computational layers",
                self.activations.len(),
                self.hidden_layer_sizes.len() + 1
            )));
        }
        Ok(())
    }

    /// Sizes of every layer including the input.
    pub fn topology(&self) -> Vec<usize> {
        std::iter::once(self.input_size)
            .chain(self.hidden_layer_sizes.iter().copied())
            .chain(std::iter::once(self.output_size))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`: entry `k * inputs + j` is `w_kj`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for k in 0..self.outputs {
            let row = &self.weights[k * self.inputs..(k + 1) * self.inputs];
            let s: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[k];
            out.push(self.activation.apply(s));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub layers: Vec<Layer>,
}

/// Seeded fan-in scaled uniform weights, zero biases.
pub fn init_network(config: &NetworkConfig) -> Result<MlpNetwork, NetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let topology = config.topology();
    let layers = topology
        .windows(2)
        .zip(&config.activations)
        .map(|(w, &activation)| {
            let (fan_in, outputs) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            Layer {
                inputs: fan_in,
                outputs,
                weights: (0..fan_in * outputs).map(|_| dist.sample(&mut rng)).collect(),
                biases: vec![0.0; outputs],
                activation,
            }
        })
        .collect();
    Ok(MlpNetwork { layers })
}

/// Training pairs for a network: input vectors and target vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Samples {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self, NetError> {
        if inputs.len() != targets.len() {
            return Err(NetError::SizeMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        Ok(Self { inputs, targets })
    }

    /// Scalar-target supervised set as single-output samples.
    pub fn from_supervised(set: &crate::series::SupervisedSet) -> Self {
        Self {
            inputs: set.inputs.clone(),
            targets: set.targets.iter().map(|&t| vec![t]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Chronological split: the trailing `fraction` becomes the second part.
    pub fn split_tail(&self, fraction: f64) -> (Samples, Samples) {
        let n = self.len();
        let tail = ((n as f64) * fraction).round() as usize;
        let cut = n - tail.min(n);
        (
            Samples {
                inputs: self.inputs[..cut].to_vec(),
                targets: self.targets[..cut].to_vec(),
            },
            Samples {
                inputs: self.inputs[cut..].to_vec(),
                targets: self.targets[cut..].to_vec(),
            },
        )
    }
}

impl MlpNetwork {
    pub fn input_size(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn output_activation(&self) -> Activation {
        self.layers.last().map_or(Activation::Identity, |l| l.activation)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.param_count() {
            return Err(NetError::SizeMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.input_size() {
            return Err(NetError::SizeMismatch {
                expected: self.input_size(),
                got: input.len(),
            });
        }
        let mut current = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&current, &mut next);
            std::mem::swap(&mut current, &mut next);
        }
        Ok(current)
    }

    /// Outputs of every layer, input first.
    fn forward_trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(input.to_vec());
        for layer in &self.layers {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward_into(trace.last().expect("input present"), &mut out);
            trace.push(out);
        }
        trace
    }

    /// Accumulates `Σ_k seed_k ∂y_k/∂w` into `grad` by reverse-mode
    /// propagation through a stored forward trace.
    fn backprop(&self, trace: &[Vec<f64>], seed: &[f64], grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = seed
            .iter()
            .zip(&trace[last + 1])
            .map(|(g, &a)| g * self.layers[last].activation.derivative_from_output(a))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace[l];
            let off = offsets[l];
            for (k, d) in delta.iter().enumerate() {
                let row = &mut grad[off + k * layer.inputs..off + (k + 1) * layer.inputs];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
            }
            let boff = off + layer.weights.len();
            for (k, d) in delta.iter().enumerate() {
                grad[boff + k] += d;
            }
            if l > 0 {
                let below = self.layers[l - 1].activation;
                let mut prev = vec![0.0; layer.inputs];
                for (k, d) in delta.iter().enumerate() {
                    let row = &layer.weights[k * layer.inputs..(k + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= below.derivative_from_output(a);
                }
                delta = prev;
            }
        }
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.param_count();
        }
        offsets
    }

    fn check_samples(&self, data: &Samples) -> Result<(), NetError> {
        if data.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        for (x, t) in data.inputs.iter().zip(&data.targets) {
            if x.len() != self.input_size() {
                return Err(NetError::SizeMismatch {
                    expected: self.input_size(),
                    got: x.len(),
                });
            }
            if t.len() != self.output_size() {
                return Err(NetError::SizeMismatch {
                    expected: self.output_size(),
                    got: t.len(),
                });
            }
        }
        Ok(())
    }

    /// Sum of squared errors over `data`.
    pub fn sse(&self, data: &Samples) -> Result<f64, NetError> {
        self.check_samples(data)?;
        let mut total = 0.0;
        for (x, t) in data.inputs.iter().zip(&data.targets) {
            let y = self.forward(x)?;
            total += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        Ok(total)
    }

    /// Mean over samples and outputs of the squared error.
    pub fn mse(&self, data: &Samples) -> Result<f64, NetError> {
        Ok(self.sse(data)? / (data.len() * self.output_size()) as f64)
    }

    /// Gradient of `½ SSE` in the flattened parameter layout.
    pub fn gradient(&self, data: &Samples) -> Result<Vec<f64>, NetError> {
        self.check_samples(data)?;
        let mut grad = vec![0.0; self.param_count()];
        for (x, t) in data.inputs.iter().zip(&data.targets) {
            let trace = self.forward_trace(x);
            let out = trace.last().expect("output layer");
            let resid: Vec<f64> = out.iter().zip(t).map(|(y, t)| y - t).collect();
            self.backprop(&trace, &resid, &mut grad);
        }
        Ok(grad)
    }

    /// Residuals `e = t - y` and the Jacobian `∂y/∂w`, one row per
    /// (sample, output), row-major.
    pub fn jacobian(&self, data: &Samples) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        self.check_samples(data)?;
        let np = self.param_count();
        let no = self.output_size();
        let rows = data.len() * no;
        let mut jac = vec![0.0; rows * np];
        let mut errors = Vec::with_capacity(rows);
        let mut seed = vec![0.0; no];
        for (i, (x, t)) in data.inputs.iter().zip(&data.targets).enumerate() {
            let trace = self.forward_trace(x);
            let out = trace.last().expect("output layer");
            for o in 0..no {
                errors.push(t[o] - out[o]);
                seed.iter_mut().for_each(|s| *s = 0.0);
                seed[o] = 1.0;
                let r = i * no + o;
                self.backprop(&trace, &seed, &mut jac[r * np..(r + 1) * np]);
            }
        }
        Ok((errors, jac))
    }
}

pub fn forward(network: &MlpNetwork, input: &[f64]) -> Result<Vec<f64>, NetError> {
    network.forward(input)
}

/// Gradient of `½ SSE` over `data` with respect to every parameter.
pub fn compute_gradient(network: &MlpNetwork, data: &Samples) -> Result<Vec<f64>, NetError> {
    network.gradient(data)
}
