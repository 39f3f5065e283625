//! Closed-loop campaigns: estimate, check termination, design, execute.
//!
//! Three design strategies share the estimation, the objective surrogate and
//! the plant noise stream; they differ only in how the constraints enter the
//! design problem:
//!
//! * [`Method::Gp`] models every constraint with a GP whose prior mean is the
//!   fitted model, tightens it with the Cantelli factor and restricts the step
//!   to adaptive trust regions;
//! * [`Method::Mc`] adds Monte-Carlo backoffs computed from the parameter
//!   posterior to the nominal model constraints;
//! * [`Method::De`] adds the disturbance observed at the latest experiment.

mod config;
mod design_step;

pub use config::{CampaignConfig, McSettings, MismatchSettings, MleSettings};

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case_study::CaseStudy;
use crate::design::SurrogateError;
use crate::estimation::{
    laplace_posterior, mle_fit, statistics, Dataset, EstimationError, FitReport, MleConfig, PosteriorGaussian,
};
use crate::gp::{GpError, KernelSpec};
use crate::kinetics::{KineticsError, Measurement};
use crate::linalg::distance;
use crate::rng::{stream_rng, Stream};
use crate::safe_opt::{SafeOptError, TrustRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gp,
    Mc,
    De,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gp, Method::Mc, Method::De];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gp => "gp",
            Method::Mc => "mc",
            Method::De => "de",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gp" | "gp-mbdoe" => Ok(Method::Gp),
            "mc" | "mc-mbdoe" => Ok(Method::Mc),
            "de" | "de-mbdoe" => Ok(Method::De),
            other => Err(alloc::format!("unknown method `{other}` (expected gp, mc or de)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    /// Chi-square and all t-tests passed.
    Statistics,
    /// The last design moved less than `tol1` in normalized units.
    DesignConverged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    SafeOpt(#[from] SafeOptError),
}

/// A campaign that stopped on an error, with the state reached so far.
#[derive(Debug, Clone, Error)]
#[error("campaign aborted after {} iterations: {error}", state.records.len())]
pub struct CampaignAbort {
    pub error: CampaignError,
    pub state: Box<CampaignState>,
}

/// Parameter estimate of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub theta: Vec<f64>,
    pub v_diagonal: Vec<f64>,
    pub chi_squared: f64,
    pub n_observations: usize,
    pub converged_starts: usize,
    pub rank_deficient: bool,
    /// Adequacy statistics; absent while there are no degrees of freedom.
    pub report: Option<FitReport>,
}

/// Designed and executed experiment of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    /// Operating point the step was taken from.
    pub center: Vec<f64>,
    pub design: Vec<f64>,
    /// `‖z* − z_k‖` in normalized units.
    pub step: f64,
    /// Shared trust-region radius used by the solve (GP method only).
    pub ball_radius: Option<f64>,
    pub solve_feasible: bool,
    /// Propagated objective mean and variance at the design.
    pub objective_mean: Option<f64>,
    pub objective_variance: Option<f64>,
    /// Predicted constraint mean and variance at the design before execution.
    pub predicted_mean: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    /// Constraint values the solve enforced (`≤ 0`).
    pub tightened: Vec<f64>,
    /// Monte-Carlo backoffs or disturbance estimates; empty for the GP method.
    pub margins: Vec<f64>,
    pub backoff_passes: usize,
    pub measurement: Measurement,
    pub violated: Vec<bool>,
    pub rho: Vec<f64>,
    pub radii_before: Vec<f64>,
    pub radii_after: Vec<f64>,
    pub backtracked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub method: Method,
    pub estimate: EstimateRecord,
    pub design: Option<DesignRecord>,
    pub termination: Option<TerminationReason>,
    /// Model integrations spent by estimation, surrogate training and sampling.
    pub model_evaluations: usize,
}

/// Everything a campaign has produced so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    pub case: String,
    pub method: Method,
    pub seed: u64,
    /// Preliminary experiments followed by designed ones.
    pub data: Vec<Measurement>,
    pub n_preliminary: usize,
    pub records: Vec<IterationRecord>,
    pub theta: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Trust-region radii (GP method), one per constraint.
    pub radii: Vec<f64>,
    /// Current operating point in physical units.
    pub center: Vec<f64>,
    pub termination: Option<TerminationReason>,
}

impl CampaignState {
    /// Experiments chosen by the design loop.
    pub fn designed(&self) -> &[Measurement] {
        &self.data[self.n_preliminary..]
    }

    /// Designed experiments that violated constraint `i`.
    pub fn violations(&self, i: usize) -> usize {
        self.designed().iter().filter(|m| m.g[i] > 0.0).count()
    }

    /// Fraction of designed experiments that violated constraint `i`.
    pub fn violation_rate(&self, i: usize) -> f64 {
        let n = self.designed().len();
        if n == 0 {
            0.0
        } else {
            self.violations(i) as f64 / n as f64
        }
    }

    pub fn final_estimate(&self) -> Option<&EstimateRecord> {
        self.records.last().map(|r| &r.estimate)
    }
}

/// Stop rule: statistics pass, or the previous design step was at most `tol1`.
pub fn check_termination(report: Option<&FitReport>, last_step: Option<f64>, tol1: f64) -> Option<TerminationReason> {
    if report.is_some_and(FitReport::passes) {
        return Some(TerminationReason::Statistics);
    }
    if last_step.is_some_and(|s| s <= tol1) {
        return Some(TerminationReason::DesignConverged);
    }
    None
}

/// Feasible preliminary point with the largest slack; without one, the point
/// with the smallest worst violation.
fn initial_center(data: &[Measurement]) -> Vec<f64> {
    let worst = |m: &Measurement| m.g.iter().fold(f64::NEG_INFINITY, |a, v| a.max(*v));
    data.iter()
        .min_by(|a, b| worst(a).total_cmp(&worst(b)))
        .map(|m| m.u.clone())
        .unwrap_or_default()
}

/// One campaign run of one method on one case study.
#[derive(Debug)]
pub struct Campaign {
    case: CaseStudy,
    cfg: CampaignConfig,
    state: CampaignState,
    posterior: Option<PosteriorGaussian>,
    surrogate_kernel: Option<KernelSpec>,
    mismatch_kernels: Vec<Option<KernelSpec>>,
}

impl Campaign {
    /// Validates the inputs and runs the preliminary experiments.
    pub fn new(case: CaseStudy, cfg: CampaignConfig) -> Result<Self, CampaignError> {
        case.validate()?;
        cfg.validate().map_err(CampaignError::Config)?;
        let nu = case.plant.design_space.dim();
        if case.initial_experiments.len() < nu + 1 {
            return Err(CampaignError::Config(alloc::format!(
                "need at least {} preliminary experiments, got {}",
                nu + 1,
                case.initial_experiments.len()
            )));
        }
        let mut data = Vec::with_capacity(case.initial_experiments.len() + cfg.max_iterations);
        for (i, u) in case.initial_experiments.iter().enumerate() {
            data.push(case.plant.run_experiment(u, cfg.seed, i)?);
        }
        let nc = case.plant.constraints.len();
        let center = initial_center(&data);
        let state = CampaignState {
            case: case.name.clone(),
            method: cfg.method,
            seed: cfg.seed,
            n_preliminary: data.len(),
            data,
            records: Vec::new(),
            theta: case.theta_initial.clone(),
            covariance: Vec::new(),
            radii: vec![cfg.trust_region.initial_radius; nc],
            center,
            termination: None,
        };
        Ok(Self { case, cfg, state, posterior: None, surrogate_kernel: None, mismatch_kernels: vec![None; nc] })
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.cfg
    }

    pub fn case(&self) -> &CaseStudy {
        &self.case
    }

    pub fn is_finished(&self) -> bool {
        self.state.termination.is_some()
    }

    /// Runs to termination.
    pub fn run(self) -> Result<CampaignState, CampaignAbort> {
        self.run_with(|_| {})
    }

    /// Runs to termination, calling `observer` after every iteration.
    pub fn run_with<F: FnMut(&IterationRecord)>(mut self, mut observer: F) -> Result<CampaignState, CampaignAbort> {
        while !self.is_finished() {
            match self.step() {
                Ok(record) => observer(record),
                Err(error) => return Err(CampaignAbort { error, state: Box::new(self.state) }),
            }
        }
        Ok(self.state)
    }

    /// One pass of estimate, termination check and (unless stopping) design
    /// and execution.
    pub fn step(&mut self) -> Result<&IterationRecord, CampaignError> {
        let k = self.state.records.len();
        let mut evaluations = 0;
        let estimate = self.estimate(k, &mut evaluations)?;
        let last_step = self.state.records.last().and_then(|r| r.design.as_ref()).filter(|d| d.solve_feasible).map(|d| d.step);
        let mut termination = check_termination(estimate.report.as_ref(), last_step, self.cfg.tol1);
        if termination.is_none() && k >= self.cfg.max_iterations {
            termination = Some(TerminationReason::MaxIterations);
        }
        let design = match termination {
            Some(_) => None,
            None => Some(self.design_and_execute(k, &mut evaluations)?),
        };
        self.state.termination = termination;
        self.state.records.push(IterationRecord {
            iteration: k,
            method: self.cfg.method,
            estimate,
            design,
            termination,
            model_evaluations: evaluations,
        });
        Ok(self.state.records.last().expect("record just pushed"))
    }

    fn estimate(&mut self, k: usize, evaluations: &mut usize) -> Result<EstimateRecord, CampaignError> {
        let ds = Dataset { model: &self.case.model, data: &self.state.data, std: &self.case.measurement_std };
        let (start, n_starts) = if k == 0 {
            (self.case.theta_initial.clone(), self.cfg.mle.n_starts)
        } else {
            (self.state.theta.clone(), self.cfg.mle.refit_starts)
        };
        let mle_cfg = MleConfig {
            lower: self.case.theta_lower.clone(),
            upper: self.case.theta_upper.clone(),
            n_starts: n_starts.max(1),
            max_iterations: self.cfg.mle.max_iterations,
        };
        let mut rng = stream_rng(self.cfg.seed, Stream::OptimizerStarts, 2 * k as u64);
        let fit = mle_fit(&ds, &start, &mle_cfg, &mut rng)?;
        *evaluations += fit.model_evaluations;
        let post = laplace_posterior(&ds, &fit.theta)?;
        *evaluations += self.state.data.len() * (fit.theta.len() + 1);
        let n_obs = ds.n_observations();
        let report = match statistics(&fit.theta, &post.covariance, fit.chi_squared, n_obs, self.cfg.significance) {
            Ok(r) => Some(r),
            Err(EstimationError::NonPositiveDof(_)) => None,
            Err(e) => return Err(e.into()),
        };
        let np = fit.theta.len();
        self.state.theta = fit.theta.clone();
        self.state.covariance = (0..np).map(|i| (0..np).map(|j| post.covariance[(i, j)]).collect()).collect();
        let record = EstimateRecord {
            theta: fit.theta,
            v_diagonal: (0..np).map(|i| post.covariance[(i, i)]).collect(),
            chi_squared: fit.chi_squared,
            n_observations: n_obs,
            converged_starts: fit.converged_starts,
            rank_deficient: post.rank_deficient,
            report,
        };
        self.posterior = Some(post);
        Ok(record)
    }

    fn design_and_execute(&mut self, k: usize, evaluations: &mut usize) -> Result<DesignRecord, CampaignError> {
        let proposal = design_step::propose(self, k, evaluations)?;
        let space = &self.case.plant.design_space;
        let design = space.clamp(&proposal.design);
        let index = self.state.data.len();
        let measurement = self.case.plant.run_experiment(&design, self.cfg.seed, index)?;
        let violated: Vec<bool> = measurement.g.iter().map(|g| *g > 0.0).collect();

        let radii_before = self.state.radii.clone();
        let mut rho = Vec::new();
        let mut radii_after = Vec::new();
        let mut backtracked = false;
        let center = self.state.center.clone();
        if self.cfg.method == Method::Gp {
            let p = &self.cfg.trust_region;
            for i in 0..radii_before.len() {
                let r = crate::safe_opt::prediction_accuracy(measurement.g[i], proposal.predicted_mean[i]);
                rho.push(r);
                radii_after.push(TrustRegion { radius: radii_before[i] }.step(p, r, violated[i]).radius);
            }
            backtracked = violated.iter().any(|v| *v);
            self.state.radii = radii_after.clone();
            if !backtracked {
                self.state.center = design.clone();
            }
        } else {
            self.state.center = design.clone();
        }
        let step = distance(&space.normalize(&design), &space.normalize(&center));
        self.state.data.push(measurement.clone());
        Ok(DesignRecord {
            center,
            design,
            step,
            ball_radius: proposal.ball_radius,
            solve_feasible: proposal.feasible,
            objective_mean: proposal.objective_mean,
            objective_variance: proposal.objective_variance,
            predicted_mean: proposal.predicted_mean,
            predicted_variance: proposal.predicted_variance,
            tightened: proposal.tightened,
            margins: proposal.margins,
            backoff_passes: proposal.backoff_passes,
            measurement,
            violated,
            rho,
            radii_before: if self.cfg.method == Method::Gp { radii_before } else { Vec::new() },
            radii_after,
            backtracked,
        })
    }
}

/// Recomputes every trust-region radius of a GP campaign from the recorded
/// accuracies and violation flags. Returns the first iteration whose recorded
/// radii differ from the replay.
pub fn replay_trust_regions(
    params: &crate::safe_opt::TrustRegionParams,
    n_constraints: usize,
    records: &[IterationRecord],
) -> Result<(), usize> {
    let mut radii: Vec<TrustRegion> = vec![TrustRegion::new(params); n_constraints];
    for r in records {
        let Some(d) = &r.design else { continue };
        if d.radii_before.len() != n_constraints || d.radii_before.iter().zip(&radii).any(|(a, b)| *a != b.radius) {
            return Err(r.iteration);
        }
        for i in 0..n_constraints {
            radii[i] = radii[i].step(params, d.rho[i], d.violated[i]);
        }
        if d.radii_after.iter().zip(&radii).any(|(a, b)| *a != b.radius) {
            return Err(r.iteration);
        }
    }
    Ok(())
}
