//! Chance-constraint tightening, trust regions and the constrained design solve.

mod solve;
mod trust_region;

pub use solve::{project_ball_box, solve_design, DesignProblem, DesignSolution, SolveOptions};
pub use trust_region::{prediction_accuracy, TrustRegion, TrustRegionParams};

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::gp::{GpError, GpModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafeOptError {
    #[error("violation probability must lie in (0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("invalid trust-region parameters: {0}")]
    InvalidTrustRegion(&'static str),
    #[error("design solve failed: no start produced a finite objective ({starts} starts)")]
    SolveFailed { starts: usize },
    #[error("design problem has dimension {0}")]
    Dimension(usize),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Cantelli tightening factor `r = √((1 − ε)/ε)`.
pub fn cantelli_r(epsilon: f64) -> Result<f64, SafeOptError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SafeOptError::InvalidProbability(epsilon));
    }
    Ok(((1.0 - epsilon) / epsilon).sqrt())
}

/// `P(g(u) ≤ 0) ≥ 1 − ε` enforced through a GP model of `g`.
///
/// The GP takes normalized design coordinates. Its prior mean is normally the
/// parametric prediction `ĝ(u)`, so the GP carries only the mismatch.
#[derive(Debug, Clone)]
pub struct ChanceConstraint {
    pub index: usize,
    pub name: String,
    pub epsilon: f64,
    pub gp: GpModel,
}

/// Mean, variance and tightened value of a chance constraint at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tightened {
    pub mean: f64,
    pub variance: f64,
    pub value: f64,
}

impl ChanceConstraint {
    pub fn new(index: usize, name: String, epsilon: f64, gp: GpModel) -> Result<Self, SafeOptError> {
        cantelli_r(epsilon)?;
        Ok(Self { index, name, epsilon, gp })
    }

    pub fn r(&self) -> f64 {
        ((1.0 - self.epsilon) / self.epsilon).sqrt()
    }

    /// `m(z) + r√Σ(z)`; the point is feasible when this is at most zero.
    pub fn tightened(&self, z: &[f64]) -> Result<Tightened, SafeOptError> {
        let (mean, variance) = self.gp.predict(z)?;
        Ok(Tightened { mean, variance, value: mean + self.r() * variance.sqrt() })
    }
}

/// Tightened values of several constraints, for use inside a solve.
pub fn tightened_all(constraints: &[ChanceConstraint], z: &[f64]) -> Result<Vec<Tightened>, SafeOptError> {
    constraints.iter().map(|c| c.tightened(z)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{KernelFamily, KernelSpec, PriorMean};
    use alloc::vec;

    #[test]
    fn cantelli_values() {
        assert_eq!(cantelli_r(0.5).unwrap(), 1.0);
        assert!((cantelli_r(0.1).unwrap() - 3.0).abs() < 1e-15);
        assert!((cantelli_r(0.01).unwrap() - 9.949_874_371).abs() < 1e-9);
        assert!(cantelli_r(0.0).is_err());
        assert!(cantelli_r(1.0).is_err());
        assert!(cantelli_r(f64::NAN).is_err());
    }

    #[test]
    fn tightening_at_training_point_is_observation() {
        let k = KernelSpec::new(KernelFamily::SquaredExponential, 0.04, vec![2.0], 0.0);
        let gp = GpModel::new(k, &[vec![-0.5], vec![0.5]], &[-0.2, 0.1], PriorMean::Zero).unwrap();
        let c = ChanceConstraint::new(0, "g1".into(), 0.1, gp).unwrap();
        let t = c.tightened(&[0.5]).unwrap();
        assert!((t.value - 0.1).abs() < 1e-6);
        // half probability: raw mean
        let half = ChanceConstraint { epsilon: 0.5, ..c.clone() };
        let t = half.tightened(&[0.1]).unwrap();
        assert!((t.value - t.mean - t.variance.sqrt()).abs() < 1e-15);
    }
}
