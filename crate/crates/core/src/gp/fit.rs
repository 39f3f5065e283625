use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{dprofile, profile, KernelFamily, KernelSpec};
use super::model::{GpModel, PriorMean};
use super::GpError;
use crate::lhs;
use crate::linalg::cholesky_jittered;
use crate::optim::{minimize, QnOptions};

/// Settings of the marginal-likelihood search.
///
/// Bounds are on natural logarithms of the hyperparameters expressed for the
/// standardized targets, so they do not depend on the output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperFitConfig {
    pub n_multistarts: usize,
    pub log_signal_bounds: (f64, f64),
    pub log_lambda_bounds: (f64, f64),
    pub log_noise_bounds: (f64, f64),
    /// Known noise variance in original output units. When set the noise is not
    /// fitted.
    pub fixed_noise_variance: Option<f64>,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for HyperFitConfig {
    fn default() -> Self {
        Self {
            n_multistarts: 5,
            log_signal_bounds: (-9.0, 4.0),
            log_lambda_bounds: (-8.0, 9.0),
            log_noise_bounds: (-16.0, 1.0),
            fixed_noise_variance: None,
            seed: 0,
            max_iterations: 200,
        }
    }
}

impl HyperFitConfig {
    fn validate(&self) -> Result<(), GpError> {
        if self.n_multistarts == 0 {
            return Err(GpError::InvalidConfig("n_multistarts must be at least 1"));
        }
        let ok = |b: (f64, f64)| b.0.is_finite() && b.1.is_finite() && b.0 <= b.1;
        if !(ok(self.log_signal_bounds) && ok(self.log_lambda_bounds) && ok(self.log_noise_bounds)) {
            return Err(GpError::InvalidConfig("log-hyperparameter bounds must be finite and ordered"));
        }
        if let Some(v) = self.fixed_noise_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(GpError::InvalidConfig("fixed noise variance must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

struct Problem<'a> {
    family: KernelFamily,
    inputs: &'a [Vec<f64>],
    resid: DVector<f64>,
    dim: usize,
    /// Fixed noise in standardized units, if any.
    fixed_noise: Option<f64>,
    /// Pairwise squared coordinate differences, `diffs[(i*n + j)*dim + a]`.
    diffs: Vec<f64>,
}

impl Problem<'_> {
    fn unpack(&self, p: &[f64]) -> (f64, Vec<f64>, f64) {
        let sf = p[0].exp();
        let lam: Vec<f64> = p[1..=self.dim].iter().map(|v| v.exp()).collect();
        let noise = match self.fixed_noise {
            Some(v) => v,
            None => p[self.dim + 1].exp(),
        };
        (sf, lam, noise)
    }

    /// Negative log marginal likelihood and its gradient in log coordinates.
    fn nlml(&self, p: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let n = self.inputs.len();
        let d = self.dim;
        let (sf, lam, noise) = self.unpack(p);
        let mut s_mat = vec![0.0; n * n];
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let base = (i * n + j) * d;
                let s: f64 = (0..d).map(|a| lam[a] * self.diffs[base + a]).sum();
                s_mat[i * n + j] = s;
                let v = sf * profile(self.family, s);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += noise;
        }
        let Ok(jc) = cholesky_jittered(&k) else {
            return f64::INFINITY;
        };
        let alpha = jc.factor.solve(&self.resid);
        let l = jc.factor.l_dirty();
        let log_det: f64 = (0..n).map(|i| 2.0 * l[(i, i)].ln()).sum();
        let value = 0.5 * self.resid.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * core::f64::consts::PI).ln();
        if !value.is_finite() {
            return f64::INFINITY;
        }
        if let Some(grad) = grad {
            let mut w = jc.factor.inverse();
            w -= &alpha * alpha.transpose();
            grad.iter_mut().for_each(|g| *g = 0.0);
            for i in 0..n {
                for j in 0..=i {
                    let mult = if i == j { 0.5 } else { 1.0 };
                    let wij = w[(i, j)] * mult;
                    let s = s_mat[i * n + j];
                    grad[0] += wij * sf * profile(self.family, s);
                    if i != j {
                        let dp = sf * dprofile(self.family, s);
                        let base = (i * n + j) * d;
                        for a in 0..d {
                            grad[1 + a] += wij * dp * lam[a] * self.diffs[base + a];
                        }
                    }
                }
            }
            if self.fixed_noise.is_none() {
                grad[d + 1] = 0.5 * noise * w.trace();
            }
        }
        value
    }
}

/// Log marginal likelihood of `model`'s data under its own hyperparameters.
pub fn log_marginal_likelihood(model: &GpModel) -> f64 {
    let inputs: Vec<Vec<f64>> = (0..model.len()).map(|i| model.input(i).to_vec()).collect();
    let resid = DVector::from_iterator(
        model.len(),
        inputs.iter().zip(model.targets()).map(|(x, y)| y - model.prior_mean().eval(x)),
    );
    let k = model.kernel();
    let prob = Problem {
        family: k.family,
        inputs: &inputs,
        resid,
        dim: k.dim(),
        fixed_noise: Some(k.noise_variance),
        diffs: pair_diffs(&inputs),
    };
    let mut p = vec![k.signal_variance.ln()];
    p.extend(k.lambda.iter().map(|l| l.ln()));
    -prob.nlml(&p, None)
}

fn pair_diffs(inputs: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len();
    let d = inputs.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n * n * d];
    for i in 0..n {
        for j in 0..=i {
            for a in 0..d {
                let v = inputs[i][a] - inputs[j][a];
                out[(i * n + j) * d + a] = v * v;
            }
        }
    }
    out
}

/// Fits hyperparameters by multistart maximization of the log marginal
/// likelihood and returns the conditioned model.
pub fn gp_fit(
    inputs: &[Vec<f64>],
    targets: &[f64],
    family: KernelFamily,
    prior_mean: PriorMean,
    cfg: &HyperFitConfig,
) -> Result<GpModel, GpError> {
    gp_fit_warm(inputs, targets, family, prior_mean, cfg, None)
}

/// As [`gp_fit`], additionally starting one local search from `warm`
/// (hyperparameters in original units, typically the previous fit).
pub fn gp_fit_warm(
    inputs: &[Vec<f64>],
    targets: &[f64],
    family: KernelFamily,
    prior_mean: PriorMean,
    cfg: &HyperFitConfig,
    warm: Option<&KernelSpec>,
) -> Result<GpModel, GpError> {
    cfg.validate()?;
    if inputs.len() < 2 {
        return Err(GpError::InsufficientData { needed: 2, got: inputs.len() });
    }
    if inputs.len() != targets.len() {
        return Err(GpError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
    }
    let dim = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
        return Err(GpError::DimensionMismatch { expected: dim, got: bad.len() });
    }
    let n = inputs.len();

    // Standardize: a zero prior is replaced by the sample mean; a supplied prior
    // is kept and only the residual scale is normalized.
    let raw: Vec<f64> = inputs.iter().zip(targets).map(|(x, y)| y - prior_mean.eval(x)).collect();
    let (center, scale, prior) = match prior_mean {
        PriorMean::Zero => {
            let c = raw.iter().sum::<f64>() / n as f64;
            let var = raw.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / n as f64;
            (c, guard_scale(var.sqrt(), &raw), PriorMean::Constant(c))
        }
        other => {
            let rms = (raw.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            (0.0, guard_scale(rms, &raw), other)
        }
    };
    let s2 = scale * scale;
    let resid = DVector::from_iterator(n, raw.iter().map(|v| (v - center) / scale));
    let fixed_noise = cfg.fixed_noise_variance.map(|v| (v / s2).max(0.0));

    let prob = Problem { family, inputs, resid, dim, fixed_noise, diffs: pair_diffs(inputs) };
    let mut lower = vec![cfg.log_signal_bounds.0];
    let mut upper = vec![cfg.log_signal_bounds.1];
    lower.extend(core::iter::repeat_n(cfg.log_lambda_bounds.0, dim));
    upper.extend(core::iter::repeat_n(cfg.log_lambda_bounds.1, dim));
    if fixed_noise.is_none() {
        lower.push(cfg.log_noise_bounds.0);
        upper.push(cfg.log_noise_bounds.1);
    }
    let project = |p: &mut [f64]| {
        for i in 0..p.len() {
            p[i] = p[i].clamp(lower[i], upper[i]);
        }
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm.filter(|w| w.family == family && w.dim() == dim && w.validate().is_ok()) {
        let mut p = vec![(w.signal_variance / s2).ln()];
        p.extend(w.lambda.iter().map(|l| l.ln()));
        if fixed_noise.is_none() {
            p.push((w.noise_variance / s2).max(1e-300).ln());
        }
        starts.push(p);
    }
    starts.push(heuristic_start(inputs, dim, fixed_noise.is_none()));
    if cfg.n_multistarts > starts.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        starts.extend(lhs::in_box(cfg.n_multistarts - starts.len(), &lower, &upper, &mut rng));
    }
    starts.truncate(cfg.n_multistarts.min(starts.len()));

    let opts = QnOptions {
        max_iterations: cfg.max_iterations,
        gradient_tolerance: 1e-6,
        step_tolerance: 1e-8,
        value_tolerance: 1e-10,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in &starts {
        let rep = minimize(|p, g| prob.nlml(p, g), &project, x0, &opts);
        log::debug!("gp fit start: {} iterations, {} evaluations, stop {:?}, nlml {}", rep.iterations, rep.evaluations, rep.stop, rep.value);
        if rep.value.is_finite() && best.as_ref().is_none_or(|b| rep.value < b.0) {
            best = Some((rep.value, rep.x));
        }
    }
    let (_, p) = best.ok_or(GpError::FitFailed)?;
    let (sf, lam, noise) = prob.unpack(&p);
    let kernel = KernelSpec::new(family, sf * s2, lam, match cfg.fixed_noise_variance {
        Some(v) => v,
        None => noise * s2,
    });
    GpModel::new(kernel, inputs, targets, prior)
}

fn guard_scale(scale: f64, raw: &[f64]) -> f64 {
    let mag = raw.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale > 1e-12 * mag.max(1e-300) && scale > 1e-300 {
        scale
    } else {
        1.0
    }
}

fn heuristic_start(inputs: &[Vec<f64>], dim: usize, with_noise: bool) -> Vec<f64> {
    let mut p = vec![0.0];
    for a in 0..dim {
        let (lo, hi) = inputs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[a]), hi.max(x[a])));
        let range = (hi - lo).max(1e-6);
        // lengthscale of about a third of the sampled range
        let ell = range / 3.0;
        p.push((1.0 / (ell * ell)).ln());
    }
    if with_noise {
        p.push((1e-2_f64).ln());
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::central_gradient;

    fn toy() -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.4, (i as f64 * 0.7).sin()]).collect();
        let ys = xs.iter().map(|x| x[0].sin() + 0.3 * x[1]).collect();
        (xs, ys)
    }

    #[test]
    fn nlml_gradient_matches_finite_differences() {
        let (xs, ys) = toy();
        for fam in [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52] {
            let prob = Problem {
                family: fam,
                inputs: &xs,
                resid: DVector::from_vec(ys.clone()),
                dim: 2,
                fixed_noise: None,
                diffs: pair_diffs(&xs),
            };
            let p = [0.3, -0.2, 0.5, -3.0];
            let mut g = [0.0; 4];
            prob.nlml(&p, Some(&mut g));
            let mut fd = [0.0; 4];
            central_gradient(&mut |q: &[f64]| prob.nlml(q, None), &p, 1e-6, &mut fd);
            for i in 0..4 {
                assert!((g[i] - fd[i]).abs() < 1e-5 * (1.0 + fd[i].abs()), "{fam:?} {i}: {} vs {}", g[i], fd[i]);
            }
        }
    }

    #[test]
    fn fit_improves_on_heuristic_start() {
        let (xs, ys) = toy();
        let cfg = HyperFitConfig { n_multistarts: 3, ..Default::default() };
        let m = gp_fit(&xs, &ys, KernelFamily::Matern52, PriorMean::Zero, &cfg).unwrap();
        let fitted = log_marginal_likelihood(&m);
        let k0 = KernelSpec::new(KernelFamily::Matern52, m.kernel().signal_variance, vec![1.0, 1.0], 1e-2);
        let alt = GpModel::new(k0, &xs, &ys, m.prior_mean().clone()).unwrap();
        assert!(fitted >= log_marginal_likelihood(&alt) - 1e-9);
    }

    #[test]
    fn rejects_zero_multistarts() {
        let (xs, ys) = toy();
        let cfg = HyperFitConfig { n_multistarts: 0, ..Default::default() };
        assert!(matches!(
            gp_fit(&xs, &ys, KernelFamily::Matern52, PriorMean::Zero, &cfg),
            Err(GpError::InvalidConfig(_))
        ));
    }
}
