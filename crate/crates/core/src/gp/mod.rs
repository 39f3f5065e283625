//! Gaussian-process regression.
//!
//! A [`GpModel`] is conditioned on fixed hyperparameters; [`gp_fit`] chooses
//! them by maximizing the log marginal likelihood. The prior mean may be an
//! arbitrary callable, in which case the GP models only the residual
//! `y − μ(x)`.

mod fit;
mod kernel;
mod model;

pub use fit::{gp_fit, gp_fit_warm, log_marginal_likelihood, HyperFitConfig};
pub use kernel::{KernelFamily, KernelSpec};
pub use model::{GpModel, PredictionDerivatives, PriorMean};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{inputs} inputs but {targets} targets")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("hyperparameters must be finite with positive signal variance and lengthscale weights")]
    InvalidHyperparameters,
    #[error("need at least {needed} training points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("covariance matrix is ill-conditioned: {0}")]
    Conditioning(LinalgError),
    #[error("hyperparameter fit failed on every start")]
    FitFailed,
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(&'static str),
}
