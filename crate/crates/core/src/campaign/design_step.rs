use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Campaign, CampaignError, Method};
use crate::design::{propagate_normalized, FimSpec, ObjectiveSurrogate};
use crate::estimation::Dataset;
use crate::gp::{gp_fit_warm, PriorMean};
use crate::kinetics::{ConstraintObservable, DesignSpace, KineticModel};
use crate::rng::{stream_rng, Stream};
use crate::safe_opt::{solve_design, ChanceConstraint, DesignProblem};

pub(super) struct Proposal {
    pub design: Vec<f64>,
    pub ball_radius: Option<f64>,
    pub feasible: bool,
    pub objective_mean: Option<f64>,
    pub objective_variance: Option<f64>,
    pub predicted_mean: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    pub tightened: Vec<f64>,
    pub margins: Vec<f64>,
    pub backoff_passes: usize,
}

/// Model-predicted constraint values at normalized design `z`.
fn nominal(
    model: &KineticModel,
    space: &DesignSpace,
    obs: &[ConstraintObservable],
    theta: &[f64],
    z: &[f64],
) -> Option<Vec<f64>> {
    let u = space.clamp(&space.denormalize(z));
    let y = model.integrate(&u, theta).ok()?;
    Some(obs.iter().map(|o| o.eval(&y)).collect())
}

/// Empirical quantile (inverse of the empirical CDF).
pub(super) fn quantile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let idx = ((p * n as f64).ceil() as usize).clamp(1, n) - 1;
    values[idx]
}

fn hyper_seed(seed: u64, k: usize, slot: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((k as u64) << 8) ^ slot
}

pub(super) fn propose(c: &mut Campaign, k: usize, evaluations: &mut usize) -> Result<Proposal, CampaignError> {
    let case = &c.case;
    let cfg = &c.cfg;
    let post = c.posterior.as_ref().expect("estimate precedes design");
    let theta = post.mean.clone();
    let np = theta.len();
    let space = &case.plant.design_space;
    let obs = &case.plant.constraints;
    let nc = obs.len();
    let data = &c.state.data;

    // objective surrogate, shared by all methods
    let ds = Dataset { model: &case.model, data, std: &case.measurement_std };
    let mut spec = FimSpec::from_std(&case.measurement_std, np);
    spec.prior = ds.information(&theta)?;
    *evaluations += data.len() * (np + 1);
    let mut scfg = cfg.surrogate.clone();
    scfg.hyper.seed = hyper_seed(cfg.seed, k, 0);
    if c.surrogate_kernel.is_some() {
        scfg.hyper.n_multistarts = 1;
        scfg.hyper.max_iterations = cfg.surrogate_refit_iterations;
    }
    let surrogate = ObjectiveSurrogate::train(
        &case.model,
        space,
        post,
        &case.theta_lower,
        &case.theta_upper,
        &spec,
        &scfg,
        &mut stream_rng(cfg.seed, Stream::Lhs, k as u64),
        c.surrogate_kernel.as_ref(),
    )?;
    *evaluations += surrogate.model_evaluations;
    let alpha = cfg.alpha_j;
    let cov = &post.covariance;
    let objective = |z: &[f64]| -> Option<(f64, f64)> {
        let m = propagate_normalized(&surrogate, z, &theta, cov).ok()?;
        Some((m.mean, m.variance))
    };
    let lcb = |z: &[f64]| objective(z).map(|(m, v)| m - alpha * v.sqrt());

    let center = space.normalize(&c.state.center);
    let mut rng = stream_rng(cfg.seed, Stream::OptimizerStarts, 2 * k as u64 + 1);
    let mut new_mismatch = None;

    let mut proposal = match cfg.method {
        Method::Gp => {
            let inputs: Vec<Vec<f64>> = data.iter().map(|m| space.normalize(&m.u)).collect();
            let mut constraints = Vec::with_capacity(nc);
            let mut kernels = Vec::with_capacity(nc);
            for (i, o) in obs.iter().enumerate() {
                let targets: Vec<f64> = data.iter().map(|m| m.g[i]).collect();
                let (model, sp, ob, th) = (case.model.clone(), space.clone(), o.clone(), theta.clone());
                let prior = PriorMean::function(move |z: &[f64]| {
                    let u = sp.clamp(&sp.denormalize(z));
                    model.integrate(&u, &th).map(|y| ob.eval(&y)).unwrap_or(f64::NAN)
                });
                let mut hyper = cfg.mismatch.hyper.clone();
                hyper.seed = hyper_seed(cfg.seed, k, 1 + i as u64);
                let sd = o.coefficient * case.measurement_std[o.species];
                hyper.fixed_noise_variance = Some(sd * sd);
                let gp = gp_fit_warm(&inputs, &targets, cfg.mismatch.family, prior, &hyper, c.mismatch_kernels[i].as_ref())?;
                *evaluations += inputs.len();
                kernels.push(Some(gp.kernel().clone()));
                constraints.push(ChanceConstraint::new(i, String::from(o.name.as_str()), cfg.epsilon, gp)?);
            }
            new_mismatch = Some(kernels);
            let radius = c.state.radii.iter().fold(f64::INFINITY, |a, r| a.min(*r));
            let problem = DesignProblem { n_constraints: nc, center, radius: Some(radius) };
            let sol = solve_design(
                |z, cv| {
                    for (i, con) in constraints.iter().enumerate() {
                        cv[i] = con.tightened(z).ok()?.value;
                    }
                    lcb(z)
                },
                &problem,
                &cfg.solve,
                &mut rng,
            )?;
            // No safe point in the trust region: fall back to the executed
            // experiment that the mismatch models consider safest.
            let z_star = if sol.feasible { sol.z.clone() } else { safest_executed(&constraints, &inputs)? };
            let mut mean = Vec::with_capacity(nc);
            let mut var = Vec::with_capacity(nc);
            let mut tight = Vec::with_capacity(nc);
            for con in &constraints {
                let t = con.tightened(&z_star)?;
                mean.push(t.mean);
                var.push(t.variance);
                tight.push(t.value);
            }
            Proposal {
                design: space.denormalize(&z_star),
                ball_radius: Some(radius),
                feasible: sol.feasible,
                objective_mean: None,
                objective_variance: None,
                predicted_mean: mean,
                predicted_variance: var,
                tightened: tight,
                margins: Vec::new(),
                backoff_passes: 0,
            }
        }
        Method::Mc => {
            let samples = posterior_samples(
                &theta,
                cov,
                &case.theta_lower,
                &case.theta_upper,
                cfg.mc.samples,
                &mut stream_rng(cfg.seed, Stream::McBackoff, k as u64),
            );
            let mut backoff = vec![0.0; nc];
            let mut passes = 0;
            let mut start = center.clone();
            let (sol, used) = loop {
                passes += 1;
                let problem = DesignProblem { n_constraints: nc, center: start.clone(), radius: None };
                let b = backoff.clone();
                let mut opts = cfg.solve.clone();
                if passes > 1 {
                    opts.n_starts = opts.n_starts.min(cfg.mc.later_pass_starts);
                }
                let sol = solve_design(
                    |z, cv| {
                        let g = nominal(&case.model, space, obs, &theta, z)?;
                        for i in 0..nc {
                            cv[i] = g[i] + b[i];
                        }
                        lcb(z)
                    },
                    &problem,
                    &opts,
                    &mut rng,
                )?;
                let u = space.clamp(&space.denormalize(&sol.z));
                let g0 = nominal(&case.model, space, obs, &theta, &sol.z)
                    .ok_or_else(|| CampaignError::Config(String::from("nominal model failed at the design")))?;
                let mut per_constraint: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); nc];
                for s in &samples {
                    if let Ok(y) = case.model.integrate(&u, s) {
                        for (i, o) in obs.iter().enumerate() {
                            per_constraint[i].push(o.eval(&y));
                        }
                    }
                }
                *evaluations += samples.len();
                let mut change: f64 = 0.0;
                let mut next = backoff.clone();
                for i in 0..nc {
                    if per_constraint[i].is_empty() {
                        continue;
                    }
                    next[i] = quantile(&mut per_constraint[i], 1.0 - cfg.epsilon) - g0[i];
                    change = change.max((next[i] - backoff[i]).abs());
                }
                if change < cfg.mc.tolerance || passes >= cfg.mc.max_passes {
                    break (sol, b);
                }
                backoff = next;
                start = sol.z;
            };
            let g = nominal(&case.model, space, obs, &theta, &sol.z).unwrap_or_else(|| vec![f64::NAN; nc]);
            Proposal {
                design: space.denormalize(&sol.z),
                ball_radius: None,
                feasible: sol.feasible,
                objective_mean: None,
                objective_variance: None,
                predicted_mean: g.iter().zip(&used).map(|(a, b)| a + b).collect(),
                predicted_variance: vec![0.0; nc],
                tightened: sol.constraints.clone(),
                margins: used,
                backoff_passes: passes,
            }
        }
        Method::De => {
            let last = data.last().expect("preliminary experiments exist");
            let z_last = space.normalize(&last.u);
            let g_last = nominal(&case.model, space, obs, &theta, &z_last)
                .ok_or_else(|| CampaignError::Config(String::from("nominal model failed at the latest experiment")))?;
            let dist: Vec<f64> = (0..nc).map(|i| last.g[i] - g_last[i]).collect();
            let problem = DesignProblem { n_constraints: nc, center, radius: None };
            let sol = solve_design(
                |z, cv| {
                    let g = nominal(&case.model, space, obs, &theta, z)?;
                    for i in 0..nc {
                        cv[i] = g[i] + dist[i];
                    }
                    lcb(z)
                },
                &problem,
                &cfg.solve,
                &mut rng,
            )?;
            Proposal {
                design: space.denormalize(&sol.z),
                ball_radius: None,
                feasible: sol.feasible,
                objective_mean: None,
                objective_variance: None,
                predicted_mean: sol.constraints.clone(),
                predicted_variance: vec![0.0; nc],
                tightened: sol.constraints.clone(),
                margins: dist,
                backoff_passes: 0,
            }
        }
    };
    let z = space.normalize(&proposal.design);
    if let Some((m, v)) = objective(&z) {
        proposal.objective_mean = Some(m);
        proposal.objective_variance = Some(v);
    }
    c.surrogate_kernel = Some(surrogate.gp.kernel().clone());
    if let Some(kernels) = new_mismatch {
        c.mismatch_kernels = kernels;
    }
    Ok(proposal)
}

/// Executed design with the smallest worst tightened constraint value.
fn safest_executed(constraints: &[ChanceConstraint], inputs: &[Vec<f64>]) -> Result<Vec<f64>, CampaignError> {
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for z in inputs {
        let mut worst = f64::NEG_INFINITY;
        for con in constraints {
            worst = worst.max(con.tightened(z)?.value);
        }
        if best.is_none_or(|(b, _)| worst < b) {
            best = Some((worst, z));
        }
    }
    Ok(best.map(|(_, z)| z.clone()).expect("preliminary experiments exist"))
}

/// Draws from `N(mean, cov)` clamped to the parameter bounds.
pub(super) fn posterior_samples<R: Rng + ?Sized>(
    mean: &[f64],
    cov: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let np = mean.len();
    let eig = SymmetricEigen::new(cov.clone());
    let scale = DVector::from_iterator(np, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    let factor = &eig.eigenvectors * DMatrix::from_diagonal(&scale);
    (0..n)
        .map(|_| {
            let z = DVector::from_iterator(np, (0..np).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let d = &factor * z;
            (0..np).map(|j| (mean[j] + d[j]).clamp(lower[j], upper[j])).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn quantile_of_uniform_grid() {
        let mut v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(quantile(&mut v, 0.9), 900.0);
        let mut w = vec![3.0, 1.0, 2.0];
        assert_eq!(quantile(&mut w, 0.5), 2.0);
    }

    #[test]
    fn zero_covariance_samples_are_the_mean() {
        let cov = DMatrix::zeros(2, 2);
        let s = posterior_samples(&[1.0, 2.0], &cov, &[0.0, 0.0], &[5.0, 5.0], 10, &mut stream_rng(1, Stream::McBackoff, 0));
        assert!(s.iter().all(|x| x == &vec![1.0, 2.0]));
    }
}
