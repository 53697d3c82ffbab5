//! Run configuration: a JSON file with command-line overrides on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use windcast::arma::Criterion;
use windcast::neuralnet::{recipe_for_horizon, Activation, MlpRecipe, Trainer};

use crate::CliError;

/// Network initialisations tried unless configured otherwise.
pub const DEFAULT_MLP_TRIALS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Polynomial,
    Arma,
    Arima,
    Mlp,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Polynomial, Family::Arma, Family::Arima, Family::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Family::Polynomial => "polynomial",
            Family::Arma => "arma",
            Family::Arima => "arima",
            Family::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "polynomial" => Ok(Family::Polynomial),
            "arma" => Ok(Family::Arma),
            "arima" => Ok(Family::Arima),
            "mlp" => Ok(Family::Mlp),
            other => Err(CliError::Config(format!("unknown model family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolynomialOptions {
    /// Candidate degrees scored on the validation tail.
    pub degrees: Vec<usize>,
    /// Trailing share of the training pairs used to pick the degree.
    pub validation_fraction: f64,
}

impl Default for PolynomialOptions {
    fn default() -> Self {
        Self {
            degrees: (1..=5).collect(),
            validation_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderSearch {
    pub p_max: usize,
    pub q_max: usize,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaOptions {
    pub p: usize,
    pub q: usize,
    /// Replaces `p` and `q` by a grid search when present.
    pub select: Option<OrderSearch>,
}

impl Default for ArmaOptions {
    fn default() -> Self {
        Self { p: 1, q: 1, select: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArimaOptions {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl Default for ArimaOptions {
    fn default() -> Self {
        Self { p: 1, d: 1, q: 1 }
    }
}

/// Overrides applied to the default recipe for the horizon.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpOptions {
    pub hidden_layer_sizes: Option<Vec<usize>>,
    pub activations: Option<Vec<Activation>>,
    pub algorithm: Option<Trainer>,
    pub max_epochs: Option<usize>,
    pub trials: Option<usize>,
    pub validation_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_path: Option<PathBuf>,
    pub model: Family,
    /// Horizon for `fit`.
    pub horizon_hours: u32,
    /// Horizons scored by `compare`.
    pub horizons_hours: Vec<u32>,
    /// Families fitted by `compare`; the persistence baseline is always added.
    pub families: Vec<Family>,
    /// Network input lags; the polynomial always uses one.
    pub num_lags: Option<usize>,
    pub polynomial: PolynomialOptions,
    pub arma: ArmaOptions,
    pub arima: ArimaOptions,
    pub mlp: MlpOptions,
    pub train_fraction: f64,
    pub target_range: (f64, f64),
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_path: None,
            model: Family::Polynomial,
            horizon_hours: 3,
            horizons_hours: vec![3, 6, 12],
            families: Family::ALL.to_vec(),
            num_lags: None,
            polynomial: PolynomialOptions::default(),
            arma: ArmaOptions::default(),
            arima: ArimaOptions::default(),
            mlp: MlpOptions::default(),
            train_fraction: 0.7,
            target_range: (0.1, 0.9),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub model: Option<Family>,
    pub horizon_hours: Option<u32>,
    pub seed: Option<u64>,
    pub data_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults, then the optional file, then the overrides.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(m) = overrides.model {
            cfg.model = m;
        }
        if let Some(h) = overrides.horizon_hours {
            cfg.horizon_hours = h;
            cfg.horizons_hours = vec![h];
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(d) = &overrides.data_path {
            cfg.data_path = Some(d.clone());
        }
        if let Some(o) = &overrides.output_dir {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config(format!("train_fraction {} must lie in (0, 1)", self.train_fraction)));
        }
        let (lo, hi) = self.target_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CliError::Config(format!("target_range ({lo}, {hi}) must be increasing")));
        }
        if self.horizon_hours == 0 || self.horizons_hours.contains(&0) {
            return Err(CliError::Config("horizons must be positive".into()));
        }
        if self.horizons_hours.is_empty() {
            return Err(CliError::Config("no horizons to compare".into()));
        }
        if self.num_lags == Some(0) {
            return Err(CliError::Config("num_lags must be positive".into()));
        }
        Ok(())
    }

    pub fn data_path(&self) -> Result<&Path, CliError> {
        self.data_path
            .as_deref()
            .ok_or_else(|| CliError::Config("no data_path given".into()))
    }

    /// Network recipe for a horizon: the default one for 3, 6 or 12 hours
    /// (the 6 hour one otherwise) with the configured overrides, restarted
    /// from [`DEFAULT_MLP_TRIALS`] seeds by default.
    pub fn mlp_recipe(&self, horizon_hours: u32) -> MlpRecipe {
        let mut recipe = recipe_for_horizon(horizon_hours).unwrap_or_else(|| recipe_for_horizon(6).expect("6 h recipe"));
        let o = &self.mlp;
        if let Some(n) = self.num_lags {
            recipe.num_lags = n;
        }
        if let Some(h) = &o.hidden_layer_sizes {
            recipe.hidden_layer_sizes = h.clone();
        }
        if let Some(a) = &o.activations {
            recipe.activations = a.clone();
        }
        if let Some(a) = o.algorithm {
            recipe.train.algorithm = a;
        }
        if let Some(e) = o.max_epochs {
            recipe.train.max_epochs = e;
        }
        recipe.train.trials = o.trials.unwrap_or(DEFAULT_MLP_TRIALS);
        if let Some(v) = o.validation_fraction {
            recipe.train.validation_fraction = v;
        }
        recipe.train.seed = self.seed;
        recipe
    }
}

/// Number of series steps in `hours`; the horizon must fall on the grid.
pub fn horizon_steps(hours: u32, step_seconds: i64) -> Result<usize, CliError> {
    let secs = i64::from(hours) * 3600;
    if hours == 0 || step_seconds <= 0 || secs % step_seconds != 0 {
        return Err(CliError::Config(format!(
            "horizon {hours} h is not a positive multiple of the {step_seconds} s series step"
        )));
    }
    Ok((secs / step_seconds) as usize)
}
