use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{d_metric, FimSpec};
use crate::estimation::PosteriorGaussian;
use crate::gp::{gp_fit_warm, GpError, GpModel, HyperFitConfig, KernelFamily, KernelSpec, PriorMean};
use crate::kinetics::{DesignSpace, KineticModel};
use crate::lhs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("the objective surrogate needs a twice differentiable kernel (squared-exponential or Matérn 5/2)")]
    KernelNotTwiceDifferentiable,
    #[error("only {got} of {wanted} training samples could be evaluated")]
    TooFewSamples { got: usize, wanted: usize },
    #[error(transparent)]
    Gp(#[from] GpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub size: usize,
    pub family: KernelFamily,
    pub hyper: HyperFitConfig,
    /// Half-width of the parameter box in posterior standard deviations.
    pub box_sigmas: f64,
}

/// GP over `(u, θ)` approximating the design loss `J`.
///
/// Inputs are normalized: `u` maps its design box onto `[-1, 1]`, `θ` maps the
/// box `center ± half_width` onto `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct ObjectiveSurrogate {
    pub gp: GpModel,
    pub design_space: DesignSpace,
    pub theta_center: Vec<f64>,
    pub theta_half_width: Vec<f64>,
    pub training_inputs: Vec<Vec<f64>>,
    pub training_targets: Vec<f64>,
    /// Samples that failed to evaluate and were redrawn.
    pub resampled: usize,
    pub model_evaluations: usize,
}

impl ObjectiveSurrogate {
    pub fn normalize_theta(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.theta_center.iter().zip(&self.theta_half_width))
            .map(|(t, (c, h))| (t - c) / h)
            .collect()
    }

    pub fn denormalize_theta(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.theta_center.iter().zip(&self.theta_half_width))
            .map(|(v, (c, h))| c + v * h)
            .collect()
    }

    /// Posterior mean and variance of the surrogate at fixed `(u, θ)`.
    pub fn predict(&self, u: &[f64], theta: &[f64]) -> Result<(f64, f64), GpError> {
        let mut x = self.design_space.normalize(u);
        x.extend(self.normalize_theta(theta));
        self.gp.predict(&x)
    }

    /// Parameter box `[μ − kσ, μ + kσ] ∩ [lower, upper]` as `(center, half_width)`.
    pub fn theta_box(posterior: &PosteriorGaussian, lower: &[f64], upper: &[f64], sigmas: f64) -> (Vec<f64>, Vec<f64>) {
        let sd = posterior.std_devs();
        let mut center = Vec::with_capacity(sd.len());
        let mut half = Vec::with_capacity(sd.len());
        for i in 0..sd.len() {
            let mu = posterior.mean[i];
            let lo = (mu - sigmas * sd[i]).max(lower[i]);
            let hi = (mu + sigmas * sd[i]).min(upper[i]);
            let (lo, hi) = if hi > lo { (lo, hi) } else { (mu, mu) };
            let floor = 1e-6 * mu.abs().max(1.0);
            center.push(0.5 * (lo + hi));
            half.push((0.5 * (hi - lo)).max(floor));
        }
        (center, half)
    }

    /// Trains on the D-optimal loss of `model` with information `spec`.
    #[allow(clippy::too_many_arguments)]
    pub fn train<R: Rng + ?Sized>(
        model: &KineticModel,
        design_space: &DesignSpace,
        posterior: &PosteriorGaussian,
        theta_lower: &[f64],
        theta_upper: &[f64],
        spec: &FimSpec,
        cfg: &SurrogateConfig,
        rng: &mut R,
        warm: Option<&KernelSpec>,
    ) -> Result<Self, SurrogateError> {
        let (center, half) = Self::theta_box(posterior, theta_lower, theta_upper, cfg.box_sigmas);
        let np = model.n_params();
        Self::train_with(
            |u, theta| {
                let f = spec.fim(model, u, theta).ok()?;
                let j = d_metric(&f);
                j.is_finite().then_some(j)
            },
            np + 1,
            design_space,
            center,
            half,
            cfg,
            rng,
            warm,
        )
    }

    /// Trains on an arbitrary loss `objective(u, θ)`; `cost_per_eval` is the
    /// number of model integrations one call represents (for accounting).
    #[allow(clippy::too_many_arguments)]
    pub fn train_with<F, R>(
        mut objective: F,
        cost_per_eval: usize,
        design_space: &DesignSpace,
        theta_center: Vec<f64>,
        theta_half_width: Vec<f64>,
        cfg: &SurrogateConfig,
        rng: &mut R,
        warm: Option<&KernelSpec>,
    ) -> Result<Self, SurrogateError>
    where
        F: FnMut(&[f64], &[f64]) -> Option<f64>,
        R: Rng + ?Sized,
    {
        if cfg.family == KernelFamily::Matern32 {
            return Err(SurrogateError::KernelNotTwiceDifferentiable);
        }
        let du = design_space.dim();
        let np = theta_center.len();
        let dim = du + np;
        let unit = lhs::unit_hypercube(cfg.size, dim, rng);
        let mut inputs = Vec::with_capacity(cfg.size);
        let mut targets = Vec::with_capacity(cfg.size);
        let mut resampled = 0;
        let mut evaluations = 0;
        let surrogate_frame = |z: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let u = design_space.denormalize(&z[..du]);
            let theta = z[du..]
                .iter()
                .zip(theta_center.iter().zip(&theta_half_width))
                .map(|(v, (c, h))| c + v * h)
                .collect();
            (u, theta)
        };
        for p in unit {
            let mut z: Vec<f64> = p.iter().map(|v| 2.0 * v - 1.0).collect();
            let mut attempts = 0;
            loop {
                let (u, theta) = surrogate_frame(&z);
                evaluations += cost_per_eval;
                if let Some(j) = objective(&u, &theta) {
                    inputs.push(z);
                    targets.push(j);
                    break;
                }
                attempts += 1;
                resampled += 1;
                if attempts >= 10 {
                    log::warn!("objective evaluation failed repeatedly; dropping sample");
                    break;
                }
                z = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            }
        }
        if inputs.len() < 2 || inputs.len() * 2 < cfg.size {
            return Err(SurrogateError::TooFewSamples { got: inputs.len(), wanted: cfg.size });
        }
        if resampled > 0 {
            log::info!("objective surrogate: {resampled} samples redrawn");
        }
        let gp = gp_fit_warm(&inputs, &targets, cfg.family, PriorMean::Zero, &cfg.hyper, warm)?;
        Ok(Self {
            gp,
            design_space: design_space.clone(),
            theta_center,
            theta_half_width,
            training_inputs: inputs,
            training_targets: targets,
            resampled,
            model_evaluations: evaluations,
        })
    }
}
