//! Synthetic wind-like series: a seasonal cycle plus ARMA noise, clipped at
//! zero.

use serde::{Deserialize, Serialize};
use windcast::arma::{simulate_arma, ArmaModel};
use windcast::series::{parse_timestamp, THREE_HOURS};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub mean: f64,
    /// Amplitude of `sin(2πt / period_steps)`.
    pub amplitude: f64,
    pub period_steps: f64,
    /// `ψ_1..ψ_p`.
    pub ar: Vec<f64>,
    /// `φ_1..φ_q`.
    pub ma: Vec<f64>,
    /// Shock standard deviation.
    pub sigma: f64,
    pub start_time: String,
    pub step_seconds: i64,
    pub n: usize,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            mean: 8.0,
            amplitude: 0.0,
            period_steps: 2920.0,
            ar: Vec::new(),
            ma: Vec::new(),
            sigma: 1.0,
            start_time: "2000-01-01T00:00:00Z".into(),
            step_seconds: THREE_HOURS,
            n: 1000,
            seed: 0,
        }
    }
}

impl GeneratorSpec {
    /// `8 + 4 sin(2πt / 2920)` plus AR(1) noise with `ψ = 0.8`, `σ = 0.8`:
    /// a yearly cycle on 3-hourly samples, 11000 rows.
    pub fn wind_like() -> Self {
        Self {
            mean: 8.0,
            amplitude: 4.0,
            period_steps: 2920.0,
            ar: vec![0.8],
            ma: Vec::new(),
            sigma: 0.8,
            n: 11_000,
            ..Self::default()
        }
    }

    pub fn start_seconds(&self) -> Result<i64, CliError> {
        parse_timestamp(&self.start_time)
            .ok_or_else(|| CliError::Config(format!("unparseable start_time `{}`", self.start_time)))
    }
}

/// Generated values and the number clipped to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub values: Vec<f64>,
    pub clipped: usize,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated, CliError> {
    if spec.n == 0 {
        return Err(CliError::Config("n must be positive".into()));
    }
    if spec.step_seconds <= 0 {
        return Err(CliError::Config("step_seconds must be positive".into()));
    }
    if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
        return Err(CliError::Config(format!("sigma {} must be finite and non-negative", spec.sigma)));
    }
    if spec.amplitude != 0.0 && !(spec.period_steps > 0.0) {
        return Err(CliError::Config("period_steps must be positive".into()));
    }
    let noise = ArmaModel::new(spec.ar.clone(), spec.ma.clone(), 0.0, spec.sigma * spec.sigma)?;
    let x = simulate_arma(&noise, spec.n, spec.seed)?;
    let mut clipped = 0;
    let values = x
        .iter()
        .enumerate()
        .map(|(t, v)| {
            let season = if spec.amplitude == 0.0 {
                0.0
            } else {
                spec.amplitude * (std::f64::consts::TAU * t as f64 / spec.period_steps).sin()
            };
            let y = spec.mean + season + v;
            if y < 0.0 {
                clipped += 1;
                0.0
            } else {
                y
            }
        })
        .collect();
    Ok(Generated { values, clipped })
}
