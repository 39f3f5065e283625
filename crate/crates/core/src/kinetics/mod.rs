//! Reactor models, the simulated plant and parameter sensitivities.
//!
//! Both case studies are described by data rather than code: a list of
//! power-law reactions, an Arrhenius parametrization and a reactor type. The
//! parameter vector is laid out as `[k⁰₁, E₁, k⁰₂, E₂, …]`.

mod design_space;
mod model;
mod plant;

pub use design_space::{DesignPoint, DesignSpace};
pub use model::{
    arrhenius, KineticModel, Parametrization, Reaction, Reactor, GAS_CONSTANT, REFERENCE_TEMPERATURE_C,
};
pub use plant::{ConstraintObservable, Disturbance, Measurement, Plant, PlantSpec};

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KineticsError {
    #[error("integration failed at u = {u:?}, θ = {theta:?}")]
    IntegrationFailed { u: Vec<f64>, theta: Vec<f64> },
    #[error("expected {expected} design variables, got {got}")]
    DesignDimension { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParameterDimension { expected: usize, got: usize },
    #[error("design point {u:?} lies outside the design space")]
    OutOfBounds { u: Vec<f64> },
    #[error("invalid model definition: {0}")]
    InvalidModel(&'static str),
}
