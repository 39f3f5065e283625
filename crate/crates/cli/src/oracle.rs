//! Brute-force reference computations checked against the library.
//!
//! Each oracle computes its reference without the library routine under
//! test: closed forms, sampling or plain finite differences.

use std::fmt;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use safedoe_core::design::propagate_gp;
use safedoe_core::gp::{gp_fit, GpModel, HyperFitConfig, KernelFamily, KernelSpec, PriorMean};
use safedoe_core::safe_opt::cantelli_r;
use safedoe_core::CaseStudy;

pub const NAMES: [&str; 5] = ["cantelli", "gp2pt", "gp-derivatives", "mc-propagate", "fd-sensitivity"];

/// One library value next to its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub library: f64,
    pub reference: f64,
    /// Allowed deviation, relative to `max(|reference|, scale)`.
    pub tolerance: f64,
    pub scale: f64,
}

impl Check {
    pub fn error(&self) -> f64 {
        (self.library - self.reference).abs() / self.reference.abs().max(self.scale)
    }

    pub fn passes(&self) -> bool {
        self.error() <= self.tolerance
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: library {:.10e} reference {:.10e} error {:.2e} (tol {:e})",
            if self.passes() { "ok  " } else { "FAIL" },
            self.label,
            self.library,
            self.reference,
            self.error(),
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { samples: 100_000, seed: 0 }
    }
}

pub fn run(name: &str, opts: &OracleOptions) -> anyhow::Result<Vec<Check>> {
    match name {
        "cantelli" => cantelli(),
        "gp2pt" => gp_two_point(),
        "gp-derivatives" => gp_derivatives(50, opts.seed),
        "mc-propagate" => mc_propagate(opts),
        "fd-sensitivity" => fd_sensitivity(),
        other => anyhow::bail!("unknown oracle `{other}` (known: {})", NAMES.join(", ")),
    }
}

pub fn cantelli() -> anyhow::Result<Vec<Check>> {
    let mut out = vec![Check {
        label: "r(0.01) against 9.9499".into(),
        library: cantelli_r(0.01)?,
        reference: 9.9499,
        tolerance: 1e-3,
        scale: 1.0,
    }];
    for eps in [0.5, 0.1, 0.05, 0.001] {
        // P(X - m >= r s) <= 1 / (1 + r^2) = eps
        out.push(Check {
            label: format!("r({eps})"),
            library: cantelli_r(eps)?,
            reference: (1.0 / eps - 1.0).sqrt(),
            tolerance: 1e-12,
            scale: 1.0,
        });
    }
    Ok(out)
}

fn se(sf2: f64, lambda: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).zip(lambda).map(|((x, y), l)| l * (x - y) * (x - y)).sum();
    sf2 * (-0.5 * s).exp()
}

/// Posterior of a two-point GP by explicit 2x2 inversion.
pub fn gp_two_point() -> anyhow::Result<Vec<Check>> {
    struct Fixture {
        sf2: f64,
        lambda: Vec<f64>,
        sn2: f64,
        prior: f64,
        x: [Vec<f64>; 2],
        y: [f64; 2],
        tests: Vec<Vec<f64>>,
    }
    let fixtures = [
        Fixture {
            sf2: 1.0,
            lambda: vec![1.0],
            sn2: 1e-4,
            prior: 0.0,
            x: [vec![0.0], vec![1.0]],
            y: [1.0, -0.5],
            tests: vec![vec![0.5], vec![-0.3], vec![2.0], vec![0.0]],
        },
        Fixture {
            sf2: 2.5,
            lambda: vec![4.0, 0.25],
            sn2: 1e-3,
            prior: 0.7,
            x: [vec![0.1, -0.4], vec![-0.2, 0.9]],
            y: [1.3, 0.2],
            tests: vec![vec![0.0, 0.0], vec![0.1, -0.4], vec![1.0, 1.0]],
        },
    ];
    let mut out = Vec::new();
    for (fi, f) in fixtures.iter().enumerate() {
        let kernel = KernelSpec::new(KernelFamily::SquaredExponential, f.sf2, f.lambda.clone(), f.sn2);
        let gp = GpModel::new(kernel, &f.x, &f.y, PriorMean::Constant(f.prior))?;
        let a = f.sf2 + f.sn2;
        let b = se(f.sf2, &f.lambda, &f.x[0], &f.x[1]);
        let det = a * a - b * b;
        let inv = [[a / det, -b / det], [-b / det, a / det]];
        let r = [f.y[0] - f.prior, f.y[1] - f.prior];
        for t in &f.tests {
            let k = [se(f.sf2, &f.lambda, t, &f.x[0]), se(f.sf2, &f.lambda, t, &f.x[1])];
            let w = [inv[0][0] * k[0] + inv[0][1] * k[1], inv[1][0] * k[0] + inv[1][1] * k[1]];
            let mean = f.prior + w[0] * r[0] + w[1] * r[1];
            let var = f.sf2 - (k[0] * w[0] + k[1] * w[1]);
            let (m, v) = gp.predict(t)?;
            out.push(Check { label: format!("fixture {fi} mean at {t:?}"), library: m, reference: mean, tolerance: 1e-10, scale: 1.0 });
            out.push(Check { label: format!("fixture {fi} variance at {t:?}"), library: v, reference: var, tolerance: 1e-10, scale: 1.0 });
        }
    }
    Ok(out)
}

fn random_model(rng: &mut StdRng) -> anyhow::Result<GpModel> {
    let families = [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52];
    let family = families[rng.random_range(0..3)];
    let dim = rng.random_range(1..=3);
    let n = rng.random_range(3..=8);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (2.0 * v).sin()).sum::<f64>() + rng.random_range(-0.1..0.1)).collect();
    let lambda: Vec<f64> = (0..dim).map(|_| 10f64.powf(rng.random_range(-0.5..0.7))).collect();
    let kernel = KernelSpec::new(family, rng.random_range(0.3..2.0), lambda, 10f64.powf(rng.random_range(-6.0..-2.0)));
    let prior = if rng.random_bool(0.5) { PriorMean::Zero } else { PriorMean::Constant(rng.random_range(-1.0..1.0)) };
    Ok(GpModel::new(kernel, &xs, &ys, prior)?)
}

/// Mean gradient, variance gradient and variance Hessian of random GPs
/// against central differences of `predict`. Entries are compared relative
/// to `max(|fd|, 1e-3 · scale)` so that near-zero entries do not dominate.
pub fn gp_derivatives(models: usize, seed: u64) -> anyhow::Result<Vec<Check>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (h, hh) = (1e-5, 1e-4);
    for k in 0..models {
        let gp = random_model(&mut rng)?;
        let dim = gp.dim();
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
        let coords: Vec<usize> = (0..dim).collect();
        let d = gp.derivatives(&x, &coords)?;
        let at = |p: &[f64]| gp.predict(p).map_err(anyhow::Error::from);
        let scale_m = 1e-3 * (1.0 + d.mean.abs());
        let scale_v = 1e-3 * gp.kernel().signal_variance;
        for a in 0..dim {
            let mut p = x.clone();
            p[a] += h;
            let (mp, vp) = at(&p)?;
            p[a] -= 2.0 * h;
            let (mm, vm) = at(&p)?;
            let fd_m = (mp - mm) / (2.0 * h);
            let fd_v = (vp - vm) / (2.0 * h);
            out.push(Check { label: format!("model {k} dm/dx{a}"), library: d.mean_grad[a], reference: fd_m, tolerance: 1e-4, scale: scale_m });
            out.push(Check { label: format!("model {k} dv/dx{a}"), library: d.var_grad[a], reference: fd_v, tolerance: 1e-4, scale: scale_v });
            for b in 0..dim {
                let var_at = |da: f64, db: f64| -> anyhow::Result<f64> {
                    let mut p = x.clone();
                    p[a] += da;
                    p[b] += db;
                    Ok(at(&p)?.1)
                };
                let fd = (var_at(hh, hh)? - var_at(hh, -hh)? - var_at(-hh, hh)? + var_at(-hh, -hh)?) / (4.0 * hh * hh);
                out.push(Check {
                    label: format!("model {k} d2v/dx{a}dx{b}"),
                    library: d.var_hessian[(a, b)],
                    reference: fd,
                    tolerance: 1e-4,
                    scale: scale_v,
                });
            }
        }
    }
    Ok(out)
}

/// GP of `sin` on 20 noisy points of `[-2, 2]`.
pub fn sin_fixture(seed: u64) -> anyhow::Result<GpModel> {
    let mut rng = StdRng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01)?;
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![-2.0 + 4.0 * i as f64 / 19.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + noise.sample(&mut rng)).collect();
    Ok(gp_fit(&xs, &ys, KernelFamily::SquaredExponential, PriorMean::Zero, &HyperFitConfig::default())?)
}

/// Mean and variance of the GP prediction at `x ~ N(mean, var)` by sampling:
/// the law of total variance over the sampled inputs.
pub fn sampled_moments(gp: &GpModel, mean: f64, var: f64, samples: usize, seed: u64) -> anyhow::Result<(f64, f64)> {
    let mut rng = StdRng::seed_from_u64(seed.wrapping_add(1));
    let dist = Normal::new(mean, var.sqrt())?;
    let (mut sm, mut sm2, mut sv) = (0.0, 0.0, 0.0);
    for _ in 0..samples {
        let (m, v) = gp.predict(&[dist.sample(&mut rng)])?;
        sm += m;
        sm2 += m * m;
        sv += v;
    }
    let n = samples as f64;
    let m = sm / n;
    Ok((m, sv / n + (sm2 / n - m * m)))
}

/// Taylor propagation through the sin fixture against sampling, with the
/// input at N(0.1, 0.01).
pub fn mc_propagate(opts: &OracleOptions) -> anyhow::Result<Vec<Check>> {
    let gp = sin_fixture(opts.seed)?;
    let (mean, var) = (0.1, 0.01);
    let p = propagate_gp(&gp, &[mean], &[0], &DMatrix::from_element(1, 1, var))?;
    let (mc_mean, mc_var) = sampled_moments(&gp, mean, var, opts.samples, opts.seed)?;
    let (m0, v0) = gp.predict(&[mean])?;
    let exact = propagate_gp(&gp, &[mean], &[0], &DMatrix::zeros(1, 1))?;
    Ok(vec![
        Check { label: "mean".into(), library: p.mean, reference: mc_mean, tolerance: 0.15, scale: 1e-3 },
        Check { label: "variance".into(), library: p.variance, reference: mc_var, tolerance: 0.15, scale: 0.0 },
        Check { label: "zero input covariance: mean".into(), library: exact.mean, reference: m0, tolerance: 1e-12, scale: 1.0 },
        Check { label: "zero input covariance: variance".into(), library: exact.variance, reference: v0, tolerance: 1e-12, scale: 1.0 },
    ])
}

/// Kinetic sensitivities against central differences of the integrator.
pub fn fd_sensitivity() -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for case in [CaseStudy::case1(), CaseStudy::case2()] {
        let model = &case.plant.model;
        let theta = &case.plant.theta;
        for u in case.initial_experiments.iter().take(2) {
            let s = model.sensitivities(u, theta)?;
            let scale = s.amax().max(1e-12);
            let mut probe = theta.clone();
            for j in 0..theta.len() {
                let h = 1e-4 * theta[j].abs().max(1.0);
                probe[j] = theta[j] + h;
                let up = model.integrate(u, &probe)?;
                probe[j] = theta[j] - h;
                let down = model.integrate(u, &probe)?;
                probe[j] = theta[j];
                for i in 0..model.n_species() {
                    out.push(Check {
                        label: format!("{} u={u:?} dc{i}/dθ{j}", case.name),
                        library: s[(i, j)],
                        reference: (up[i] - down[i]) / (2.0 * h),
                        tolerance: 1e-4,
                        scale,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_oracles_pass() {
        for name in ["cantelli", "gp2pt", "gp-derivatives", "fd-sensitivity"] {
            for c in run(name, &OracleOptions::default()).unwrap() {
                assert!(c.passes(), "{name}: {c}");
            }
        }
    }

    #[test]
    fn unknown_oracle_is_an_error() {
        assert!(run("nope", &OracleOptions::default()).is_err());
    }
}
