//! D-optimal design objective and its GP surrogate over `(u, θ)`.

mod propagate;
mod surrogate;

pub use propagate::{propagate, propagate_gp, propagate_normalized, PropagatedMoments};
pub use surrogate::{ObjectiveSurrogate, SurrogateConfig, SurrogateError};

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::kinetics::{KineticModel, KineticsError};
use crate::linalg::{log_det_spd, symmetrize};

/// Weighting and prior information of the Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FimSpec {
    /// Diagonal of `Σ_exp`, i.e. `1/σ_i²` per output.
    pub weights: Vec<f64>,
    /// Prior information `M₀`.
    pub prior: DMatrix<f64>,
}

impl FimSpec {
    pub fn from_std(std: &[f64], n_params: usize) -> Self {
        Self {
            weights: std.iter().map(|s| 1.0 / (s * s)).collect(),
            prior: DMatrix::zeros(n_params, n_params),
        }
    }

    /// `JᵀΣ_exp J` for a sensitivity matrix with one row per output.
    pub fn information(&self, sens: &DMatrix<f64>) -> DMatrix<f64> {
        let np = sens.ncols();
        let mut out = DMatrix::zeros(np, np);
        for (i, w) in self.weights.iter().enumerate() {
            let row = sens.row(i);
            for a in 0..np {
                let ra = w * row[a];
                for b in a..np {
                    out[(a, b)] += ra * row[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                out[(a, b)] = out[(b, a)];
            }
        }
        out
    }

    /// Expected information of one experiment at `(u, θ)` plus `M₀`.
    pub fn fim(&self, model: &KineticModel, u: &[f64], theta: &[f64]) -> Result<DMatrix<f64>, KineticsError> {
        let sens = model.sensitivities(u, theta)?;
        let mut f = self.information(&sens) + &self.prior;
        symmetrize(&mut f);
        Ok(f)
    }
}

/// `−log det(F + εI)` with `ε = 1e-10·trace(F)/n`; smaller is more informative.
pub fn d_metric(fim: &DMatrix<f64>) -> f64 {
    let n = fim.nrows();
    let eps = 1e-10 * fim.trace().abs() / n.max(1) as f64;
    let mut shifted = fim.clone();
    for i in 0..n {
        shifted[(i, i)] += eps;
    }
    if let Some(ld) = log_det_spd(&shifted) {
        return -ld;
    }
    let eig = SymmetricEigen::new(shifted);
    -eig.eigenvalues.iter().map(|l| l.max(1e-300).ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn d_metric_simple_cases() {
        assert!(d_metric(&DMatrix::identity(2, 2)).abs() < 1e-9);
        let m = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![2.0, 3.0]));
        assert!((d_metric(&m) + 6.0_f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn zero_sensitivity_returns_prior() {
        let mut spec = FimSpec::from_std(&[0.1, 0.2], 2);
        spec.prior = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sens = DMatrix::zeros(2, 2);
        assert_eq!(spec.information(&sens) + &spec.prior, spec.prior);
    }
}
