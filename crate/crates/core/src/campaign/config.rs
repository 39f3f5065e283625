use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::Method;
use crate::case_study::CaseStudy;
use crate::design::SurrogateConfig;
use crate::gp::{HyperFitConfig, KernelFamily};
use crate::safe_opt::{SolveOptions, TrustRegionParams};

/// Multistart settings of the parameter estimation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleSettings {
    /// Starts of the first fit.
    pub n_starts: usize,
    /// Starts of every later fit; the first one is the previous estimate.
    pub refit_starts: usize,
    pub max_iterations: usize,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self { n_starts: 10, refit_starts: 2, max_iterations: 100 }
    }
}

/// GP models of the constraint mismatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchSettings {
    pub family: KernelFamily,
    pub hyper: HyperFitConfig,
}

impl Default for MismatchSettings {
    fn default() -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            hyper: HyperFitConfig { n_multistarts: 5, max_iterations: 100, ..HyperFitConfig::default() },
        }
    }
}

/// Monte-Carlo backoff settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    /// Largest backoff change (constraint units) accepted as converged.
    pub tolerance: f64,
    pub max_passes: usize,
    /// Solver starts of the passes after the first, which begin at the previous solution.
    pub later_pass_starts: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { samples: 1000, tolerance: 1e-3, max_passes: 10, later_pass_starts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub method: Method,
    pub seed: u64,
    /// Exploration weight of the objective standard deviation.
    pub alpha_j: f64,
    /// Allowed violation probability of every constraint.
    pub epsilon: f64,
    pub trust_region: TrustRegionParams,
    /// Design-change termination threshold in normalized units.
    pub tol1: f64,
    pub max_iterations: usize,
    /// Significance level of the adequacy tests.
    pub significance: f64,
    pub mle: MleSettings,
    pub surrogate: SurrogateConfig,
    /// Hyperparameter iterations of the warm-started surrogate refits.
    pub surrogate_refit_iterations: usize,
    pub mismatch: MismatchSettings,
    pub solve: SolveOptions,
    pub mc: McSettings,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            method: Method::Gp,
            seed: 0,
            alpha_j: 0.5,
            epsilon: 0.1,
            trust_region: TrustRegionParams::default(),
            tol1: 1e-3,
            max_iterations: 20,
            significance: 0.05,
            mle: MleSettings::default(),
            surrogate: SurrogateConfig {
                size: 200,
                family: KernelFamily::Matern52,
                hyper: HyperFitConfig { n_multistarts: 2, max_iterations: 60, ..HyperFitConfig::default() },
                box_sigmas: 3.0,
            },
            surrogate_refit_iterations: 20,
            mismatch: MismatchSettings::default(),
            solve: SolveOptions::default(),
            mc: McSettings::default(),
        }
    }
}

impl CampaignConfig {
    /// Defaults for a built-in case study: 200 surrogate samples for case 1 and
    /// 400 for case 2.
    pub fn for_case(case: &CaseStudy, method: Method, seed: u64) -> Self {
        let mut cfg = Self { method, seed, ..Self::default() };
        if case.name == "case2" {
            cfg.surrogate.size = 400;
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_j.is_finite() && self.alpha_j >= 0.0) {
            return Err(format!("alpha_j must be finite and nonnegative, got {}", self.alpha_j));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        self.trust_region.validate().map_err(|e| format!("{e}"))?;
        if !(self.tol1.is_finite() && self.tol1 >= 0.0) {
            return Err(format!("tol1 must be finite and nonnegative, got {}", self.tol1));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(format!("significance must lie in (0, 1), got {}", self.significance));
        }
        if self.mle.n_starts == 0 || self.mle.refit_starts == 0 {
            return Err("estimation needs at least one start".into());
        }
        if self.surrogate.size < 2 {
            return Err("surrogate needs at least two samples".into());
        }
        if self.surrogate.family == KernelFamily::Matern32 {
            return Err("surrogate kernel must be twice differentiable (squared-exponential or matern52)".into());
        }
        if !(self.surrogate.box_sigmas.is_finite() && self.surrogate.box_sigmas > 0.0) {
            return Err("box_sigmas must be positive".into());
        }
        if self.surrogate.hyper.n_multistarts == 0 || self.mismatch.hyper.n_multistarts == 0 {
            return Err("GP fits need at least one start".into());
        }
        if self.solve.n_starts == 0 {
            return Err("design solve needs at least one start".into());
        }
        if self.mc.samples == 0 || self.mc.max_passes == 0 {
            return Err("Monte-Carlo backoffs need samples and at least one pass".into());
        }
        Ok(())
    }
}
