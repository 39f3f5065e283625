//! Safe model-based design of experiments.
//!
//! The crate closes the loop between parameter estimation of an approximate
//! kinetic model and the design of the next experiment:
//!
//! * [`gp`] fits Gaussian processes with an optional parametric prior mean and
//!   exposes posterior derivatives.
//! * [`kinetics`] holds the reactor models, the fixed-step integrator and the
//!   simulated plant that produces noisy, disturbed measurements.
//! * [`estimation`] computes maximum-likelihood estimates, the Laplace posterior
//!   and the chi-square / t-test adequacy statistics.
//! * [`design`] evaluates the Fisher information, trains the objective surrogate
//!   over `(u, θ)` and propagates the parametric uncertainty through it.
//! * [`safe_opt`] tightens chance constraints, adapts trust regions and solves the
//!   constrained design problem.
//! * [`campaign`] orchestrates the closed loop for the GP-based method and the
//!   Monte-Carlo backoff and disturbance-estimation baselines.
//!
//! Everything here is `no_std` + `alloc`; file formats, configuration parsing and
//! the command line live in the `safedoe` crate.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod campaign;
pub mod case_study;
pub mod design;
pub mod estimation;
pub mod gp;
pub mod kinetics;
pub mod lhs;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod safe_opt;

pub use campaign::{
    Campaign, CampaignConfig, CampaignError, CampaignState, IterationRecord, Method,
    TerminationReason,
};
pub use case_study::CaseStudy;
pub use design::{FimSpec, ObjectiveSurrogate};
pub use estimation::{FitReport, PosteriorGaussian};
pub use gp::{GpModel, HyperFitConfig, KernelFamily, KernelSpec, PriorMean};
pub use kinetics::{DesignPoint, DesignSpace, KineticModel, Measurement, PlantSpec};
pub use safe_opt::{ChanceConstraint, TrustRegion, TrustRegionParams};
