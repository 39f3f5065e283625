use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DesignSpace, KineticModel, KineticsError};
use crate::rng::{stream_rng, Stream};

/// Systematic measurement error `y = scale ⊙ c + offset`, applied before noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
}

impl Disturbance {
    pub fn none(n: usize) -> Self {
        Self { scale: alloc::vec![1.0; n], offset: alloc::vec![0.0; n] }
    }

    pub fn apply(&self, c: &[f64]) -> Vec<f64> {
        c.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(v, (s, o))| s * v + o)
            .collect()
    }
}

/// Affine constraint observable `g = coefficient · y[species] + offset`;
/// satisfied when `g ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintObservable {
    pub name: String,
    pub species: usize,
    pub coefficient: f64,
    pub offset: f64,
}

impl ConstraintObservable {
    #[inline]
    pub fn eval(&self, y: &[f64]) -> f64 {
        self.coefficient * y[self.species] + self.offset
    }
}

/// The simulated "true" system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub model: KineticModel,
    pub theta: Vec<f64>,
    pub disturbance: Disturbance,
    pub noise_std: Vec<f64>,
    pub design_space: DesignSpace,
    pub constraints: Vec<ConstraintObservable>,
}

/// One executed experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub index: usize,
    pub u: Vec<f64>,
    /// Measured outlet concentrations (mol/L).
    pub y: Vec<f64>,
    /// Constraint observables computed from `y`.
    pub g: Vec<f64>,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<(), KineticsError> {
        self.model.validate()?;
        let n = self.model.n_species();
        if self.theta.len() != self.model.n_params() {
            return Err(KineticsError::ParameterDimension { expected: self.model.n_params(), got: self.theta.len() });
        }
        if self.noise_std.len() != n || self.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(KineticsError::InvalidModel("noise_std needs one nonnegative entry per species"));
        }
        if self.disturbance.scale.len() != n || self.disturbance.offset.len() != n {
            return Err(KineticsError::InvalidModel("disturbance needs one entry per species"));
        }
        if self.design_space.dim() != self.model.design_dim() {
            return Err(KineticsError::InvalidModel("design space does not match the reactor"));
        }
        if self.constraints.iter().any(|c| c.species >= n) {
            return Err(KineticsError::InvalidModel("constraint refers to an unknown species"));
        }
        Ok(())
    }

    /// Disturbed but noise-free measurement.
    pub fn expected_output(&self, u: &[f64]) -> Result<Vec<f64>, KineticsError> {
        let c = self.model.integrate(u, &self.theta)?;
        Ok(self.disturbance.apply(&c))
    }

    /// Runs experiment number `index`. The noise draw depends only on
    /// `(seed, index)`, so every method sees the same noise for its k-th
    /// experiment.
    pub fn run_experiment(&self, u: &[f64], seed: u64, index: usize) -> Result<Measurement, KineticsError> {
        if !self.design_space.contains(u) {
            return Err(KineticsError::OutOfBounds { u: u.to_vec() });
        }
        let mut y = self.expected_output(u)?;
        let mut rng = stream_rng(seed, Stream::PlantNoise, index as u64);
        for (v, s) in y.iter_mut().zip(&self.noise_std) {
            let z: f64 = rng.sample(StandardNormal);
            *v += s * z;
        }
        let g = self.constraints.iter().map(|c| c.eval(&y)).collect();
        Ok(Measurement { index, u: u.to_vec(), y, g })
    }
}

/// A plant bound to a seed that numbers its experiments.
#[derive(Debug, Clone)]
pub struct Plant {
    pub spec: PlantSpec,
    pub seed: u64,
    executed: usize,
}

impl Plant {
    pub fn new(spec: PlantSpec, seed: u64) -> Self {
        Self { spec, seed, executed: 0 }
    }

    pub fn executed(&self) -> usize {
        self.executed
    }

    pub fn run(&mut self, u: &[f64]) -> Result<Measurement, KineticsError> {
        let m = self.spec.run_experiment(u, self.seed, self.executed)?;
        self.executed += 1;
        Ok(m)
    }
}
