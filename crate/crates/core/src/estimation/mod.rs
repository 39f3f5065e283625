//! Maximum-likelihood estimation, Laplace posterior and adequacy statistics.

pub mod distributions;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{KineticModel, KineticsError, Measurement, Parametrization};
use crate::lhs;
use crate::linalg::{floor_eigenvalues, pinv_symmetric, symmetrize};
use crate::optim::{least_squares, LmOptions};
use distributions::{chi_squared_quantile, student_t_quantile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("no measurements to fit")]
    NoData,
    #[error("parameter vectors have inconsistent lengths")]
    Dimension,
    #[error("no start converged; best point {best:?}")]
    NoConvergence { best: Option<Vec<f64>> },
    #[error("degrees of freedom must be positive, got {0}")]
    NonPositiveDof(i64),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
}

/// Weighted least-squares problem over a set of measurements.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub model: &'a KineticModel,
    pub data: &'a [Measurement],
    /// Measurement standard deviation of each output.
    pub std: &'a [f64],
}

impl Dataset<'_> {
    pub fn n_observations(&self) -> usize {
        self.data.len() * self.std.len()
    }

    /// Standardized residuals `(y − ŷ(θ)) / σ`, experiment-major.
    pub fn residuals(&self, theta: &[f64]) -> Result<DVector<f64>, KineticsError> {
        let ns = self.std.len();
        let mut r = DVector::zeros(self.n_observations());
        for (k, m) in self.data.iter().enumerate() {
            let pred = self.model.integrate(&m.u, theta)?;
            for i in 0..ns {
                r[k * ns + i] = (m.y[i] - pred[i]) / self.std[i];
            }
        }
        Ok(r)
    }

    /// `Σ ((y − ŷ)/σ)²`.
    pub fn chi_squared(&self, theta: &[f64]) -> Result<f64, KineticsError> {
        Ok(self.residuals(theta)?.norm_squared())
    }

    /// Jacobian of the model outputs scaled by `1/σ`, experiment-major rows.
    pub fn scaled_sensitivities(&self, theta: &[f64]) -> Result<DMatrix<f64>, KineticsError> {
        let ns = self.std.len();
        let mut j = DMatrix::zeros(self.n_observations(), theta.len());
        for (k, m) in self.data.iter().enumerate() {
            let s = self.model.sensitivities(&m.u, theta)?;
            for i in 0..ns {
                for p in 0..theta.len() {
                    j[(k * ns + i, p)] = s[(i, p)] / self.std[i];
                }
            }
        }
        Ok(j)
    }

    /// Gauss–Newton information `Σ_k J_kᵀ Σ_y⁻¹ J_k`.
    pub fn information(&self, theta: &[f64]) -> Result<DMatrix<f64>, KineticsError> {
        let j = self.scaled_sensitivities(theta)?;
        let mut info = j.transpose() * j;
        symmetrize(&mut info);
        Ok(info)
    }
}

/// Settings of the multistart maximum-likelihood search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_starts: usize,
    pub max_iterations: usize,
}

/// Outcome of [`mle_fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub theta: Vec<f64>,
    pub chi_squared: f64,
    /// Starts whose local solve ended on a convergence criterion.
    pub converged_starts: usize,
    pub model_evaluations: usize,
}

fn log_coordinates(model: &KineticModel, n: usize) -> Vec<bool> {
    (0..n)
        .map(|j| model.parametrization == Parametrization::Standard && j % 2 == 0)
        .collect()
}

fn to_internal(theta: &[f64], log: &[bool]) -> Vec<f64> {
    theta.iter().zip(log).map(|(v, l)| if *l { v.max(1e-300).ln() } else { *v }).collect()
}

fn to_external(z: &[f64], log: &[bool]) -> Vec<f64> {
    z.iter().zip(log).map(|(v, l)| if *l { v.exp() } else { *v }).collect()
}

/// Minimizes the weighted sum of squared residuals within bounds.
///
/// The first start is `start`; the remaining `n_starts − 1` come from a Latin
/// hypercube over the bounds (log scale for pre-exponential factors of the
/// standard Arrhenius form). The best local solution is returned.
pub fn mle_fit<R: Rng + ?Sized>(
    ds: &Dataset<'_>,
    start: &[f64],
    cfg: &MleConfig,
    rng: &mut R,
) -> Result<MleResult, EstimationError> {
    if ds.data.is_empty() {
        return Err(EstimationError::NoData);
    }
    let np = ds.model.n_params();
    if start.len() != np || cfg.lower.len() != np || cfg.upper.len() != np {
        return Err(EstimationError::Dimension);
    }
    let log = log_coordinates(ds.model, np);
    let lo = to_internal(&cfg.lower, &log);
    let hi = to_internal(&cfg.upper, &log);
    let mut starts = vec![to_internal(start, &log)];
    if cfg.n_starts > 1 {
        starts.extend(lhs::in_box(cfg.n_starts - 1, &lo, &hi, rng));
    }
    let opts = LmOptions {
        max_iterations: cfg.max_iterations,
        value_tolerance: 1e-10,
        step_tolerance: 1e-10,
        gradient_tolerance: 1e-10,
    };
    let evals = core::cell::Cell::new(0usize);

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut converged = 0;
    for z0 in &starts {
        let residual = |z: &[f64]| {
            evals.set(evals.get() + ds.data.len());
            let r = ds.residuals(&to_external(z, &log)).ok()?;
            r.iter().all(|v| v.is_finite()).then_some(r)
        };
        let jacobian = |z: &[f64]| {
            evals.set(evals.get() + ds.data.len() * (np + 1));
            let theta = to_external(z, &log);
            let mut j = ds.scaled_sensitivities(&theta).ok()?;
            for p in 0..np {
                let chain = if log[p] { -theta[p] } else { -1.0 };
                j.column_mut(p).scale_mut(chain);
            }
            j.iter().all(|v| v.is_finite()).then_some(j)
        };
        let Some(rep) = least_squares(residual, jacobian, z0, &lo, &hi, &opts) else {
            continue;
        };
        log::debug!("mle start: {} iterations, stop {:?}, cost {}", rep.iterations, rep.stop, rep.cost);
        if rep.stop.converged() {
            converged += 1;
        }
        let chi2 = 2.0 * rep.cost;
        if chi2.is_finite() && best.as_ref().is_none_or(|b| chi2 < b.0) {
            best = Some((chi2, rep.x));
        }
    }
    let (chi_squared, z) = best.ok_or(EstimationError::NoConvergence { best: None })?;
    Ok(MleResult {
        theta: to_external(&z, &log),
        chi_squared,
        converged_starts: converged,
        model_evaluations: evals.get(),
    })
}

/// Gaussian approximation `N(θ̂, V_θ)` of the parameter posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGaussian {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// `n_y − n_θ`; negative when under-determined.
    pub dof: i64,
    /// Set when the information matrix had to be pseudo-inverted.
    pub rank_deficient: bool,
}

impl PosteriorGaussian {
    pub fn std_devs(&self) -> Vec<f64> {
        (0..self.mean.len()).map(|i| self.covariance[(i, i)].max(0.0).sqrt()).collect()
    }
}

/// `V_θ = (JᵀΣ_y⁻¹J)⁻¹` at `theta`, pseudo-inverted if singular and with
/// eigenvalues floored at `1e-12·trace/n`.
pub fn laplace_posterior(ds: &Dataset<'_>, theta: &[f64]) -> Result<PosteriorGaussian, EstimationError> {
    let info = ds.information(theta)?;
    Ok(posterior_from_information(theta, &info, ds.n_observations()))
}

pub fn posterior_from_information(theta: &[f64], info: &DMatrix<f64>, n_observations: usize) -> PosteriorGaussian {
    let n = theta.len();
    let (inv, rank) = pinv_symmetric(info, 1e-12);
    let floor = 1e-12 * inv.trace().max(0.0) / n as f64;
    let covariance = floor_eigenvalues(&inv, floor);
    PosteriorGaussian {
        mean: theta.to_vec(),
        covariance,
        dof: n_observations as i64 - n as i64,
        rank_deficient: rank < n,
    }
}

/// Goodness-of-fit and parameter-precision report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta: Vec<f64>,
    pub v_diagonal: Vec<f64>,
    pub dof: i64,
    pub chi_squared: f64,
    pub chi_squared_ref: f64,
    pub chi_squared_pass: bool,
    pub t_values: Vec<f64>,
    pub t_ref: f64,
    pub t_pass: Vec<bool>,
}

impl FitReport {
    pub fn all_t_pass(&self) -> bool {
        self.t_pass.iter().all(|p| *p)
    }

    /// Both adequacy tests pass.
    pub fn passes(&self) -> bool {
        self.chi_squared_pass && self.all_t_pass()
    }

    /// Half-width of the `1 − α` confidence interval of every parameter.
    pub fn confidence_half_widths(&self, alpha: f64) -> Vec<f64> {
        let q = if self.dof > 0 { student_t_quantile(1.0 - alpha / 2.0, self.dof as f64) } else { f64::NAN };
        self.v_diagonal.iter().map(|v| q * v.max(0.0).sqrt()).collect()
    }
}

/// Chi-square and t statistics at significance `alpha`.
///
/// `t_j = |θ̂_j| / (√V_jj · t(1 − α/2, dof))` is compared against
/// `t_ref = t(1 − α, dof)`; the fit passes when `χ² < χ²(1 − α, dof)`.
pub fn statistics(
    theta: &[f64],
    covariance: &DMatrix<f64>,
    chi_squared: f64,
    n_observations: usize,
    alpha: f64,
) -> Result<FitReport, EstimationError> {
    let dof = n_observations as i64 - theta.len() as i64;
    if dof <= 0 {
        return Err(EstimationError::NonPositiveDof(dof));
    }
    let d = dof as f64;
    let chi_squared_ref = chi_squared_quantile(1.0 - alpha, d);
    let t_two_sided = student_t_quantile(1.0 - alpha / 2.0, d);
    let t_ref = student_t_quantile(1.0 - alpha, d);
    let v_diagonal: Vec<f64> = (0..theta.len()).map(|i| covariance[(i, i)]).collect();
    let t_values: Vec<f64> = theta
        .iter()
        .zip(&v_diagonal)
        .map(|(th, v)| th.abs() / (v.max(0.0).sqrt() * t_two_sided))
        .collect();
    let t_pass = t_values.iter().map(|t| *t > t_ref).collect();
    Ok(FitReport {
        theta: theta.to_vec(),
        v_diagonal,
        dof,
        chi_squared,
        chi_squared_ref,
        chi_squared_pass: chi_squared < chi_squared_ref,
        t_values,
        t_ref,
        t_pass,
    })
}
