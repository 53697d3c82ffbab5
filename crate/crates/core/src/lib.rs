//! Short-horizon wind speed forecasting.
//!
//! Three model families share one data pipeline and one scoring harness:
//!
//! - [`polyfit`]: polynomial autoregression on the latest observation,
//! - [`arma`]: ARMA(p, q) and ARIMA(p, d, q) in lag-operator form,
//! - [`neuralnet`]: feedforward networks trained by gradient descent,
//!   Levenberg-Marquardt or scaled conjugate gradient.
//!
//! [`series`] ingests and reshapes the data and [`evaluation`] scores any
//! (observed, predicted) pair.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arma;
pub mod evaluation;
mod linalg;
pub mod neuralnet;
pub mod polyfit;
pub mod series;

pub use evaluation::MetricReport;
pub use series::{ScalingParams, SupervisedSet, TimeSeries};

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Series(#[from] series::SeriesError),
    #[error(transparent)]
    Poly(#[from] polyfit::PolyError),
    #[error(transparent)]
    Arma(#[from] arma::ArmaError),
    #[error(transparent)]
    Net(#[from] neuralnet::NetError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Series(_) => "series",
            Error::Poly(_) => "polyfit",
            Error::Arma(_) => "arma",
            Error::Net(_) => "neuralnet",
            Error::Eval(_) => "evaluation",
        }
    }
}
