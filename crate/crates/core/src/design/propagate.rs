use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ObjectiveSurrogate;
use crate::gp::{GpError, GpModel};

/// Mean and variance of a GP prediction at a Gaussian-distributed input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatedMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Taylor-expansion moments of `f(x)` for `x_r ~ N(x_mean_r, cov)` on the
/// coordinates `random`, the others fixed:
///
/// `m̂ = m(μ)`, `Σ̂ = Σ(μ) + ½ tr(∂²Σ · cov) + ∇mᵀ cov ∇m`, floored at zero.
pub fn propagate_gp(
    gp: &GpModel,
    x_mean: &[f64],
    random: &[usize],
    cov: &DMatrix<f64>,
) -> Result<PropagatedMoments, GpError> {
    let d = gp.derivatives(x_mean, random)?;
    let m = random.len();
    let mut trace = 0.0;
    let mut quad = 0.0;
    for a in 0..m {
        for b in 0..m {
            trace += d.var_hessian[(a, b)] * cov[(b, a)];
            quad += d.mean_grad[a] * cov[(a, b)] * d.mean_grad[b];
        }
    }
    Ok(PropagatedMoments { mean: d.mean, variance: (d.variance + 0.5 * trace + quad).max(0.0) })
}

/// Moments of the surrogate objective at design `u` (physical units) under the
/// parameter posterior `N(μ_θ, Σ_θ)`.
pub fn propagate(
    surrogate: &ObjectiveSurrogate,
    u: &[f64],
    theta_mean: &[f64],
    theta_cov: &DMatrix<f64>,
) -> Result<PropagatedMoments, GpError> {
    let z_u = surrogate.design_space.normalize(u);
    propagate_normalized(surrogate, &z_u, theta_mean, theta_cov)
}

/// As [`propagate`] with `u` already normalized to `[-1, 1]`.
pub fn propagate_normalized(
    surrogate: &ObjectiveSurrogate,
    z_u: &[f64],
    theta_mean: &[f64],
    theta_cov: &DMatrix<f64>,
) -> Result<PropagatedMoments, GpError> {
    let du = z_u.len();
    let np = theta_mean.len();
    let mut x: Vec<f64> = z_u.to_vec();
    x.extend(surrogate.normalize_theta(theta_mean));
    let coords: Vec<usize> = (du..du + np).collect();
    let h = &surrogate.theta_half_width;
    let cov_n = DMatrix::from_fn(np, np, |a, b| theta_cov[(a, b)] / (h[a] * h[b]));
    propagate_gp(&surrogate.gp, &x, &coords, &cov_n)
}
