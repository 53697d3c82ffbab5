//! Library side of the `windcast` command: configuration, model files and
//! the five subcommands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod model;
pub mod simulate;

use serde::Serialize;
use thiserror::Error;

pub use commands::{cmd_compare, cmd_evaluate, cmd_fit, cmd_forecast, cmd_simulate};
pub use config::{Family, Overrides, RunConfig};
pub use model::ModelFile;
pub use simulate::GeneratorSpec;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Schema(String),
    #[error("every model family failed: {0}")]
    AllFamiliesFailed(String),
    #[error(transparent)]
    Core(#[from] windcast::Error),
}

macro_rules! from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

from_core!(
    windcast::series::SeriesError,
    windcast::polyfit::PolyError,
    windcast::arma::ArmaError,
    windcast::neuralnet::NetError,
    windcast::evaluation::EvalError
);

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::AllFamiliesFailed(_) => "compare",
            CliError::Core(e) => e.kind(),
        }
    }

    /// `{"error": {"kind": …, "message": …}}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let env = Envelope {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        };
        serde_json::to_string(&env).expect("error envelope serializes")
    }
}

pub(crate) fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
