use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::StopReason;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost decrease below which the solve is considered converged.
    pub value_tolerance: f64,
    /// Step size (infinity norm, in solver coordinates) below which the solve stops.
    pub step_tolerance: f64,
    /// Infinity norm of `Jᵀr` below which the solve stops.
    pub gradient_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            value_tolerance: 1e-14,
            step_tolerance: 1e-12,
            gradient_tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// `½‖r‖²` at `x`.
    pub cost: f64,
    pub iterations: usize,
    pub residual_evaluations: usize,
    pub stop: StopReason,
}

/// Bounded Levenberg–Marquardt with Marquardt diagonal scaling.
///
/// `residual` returns `None` when the model cannot be evaluated at a point (for
/// example when the integrator diverges); such trial points are rejected like
/// any other cost increase. `jacobian` is only called at accepted points.
pub fn least_squares<R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LmOptions,
) -> Option<LmReport>
where
    R: FnMut(&[f64]) -> Option<DVector<f64>>,
    J: FnMut(&[f64]) -> Option<DMatrix<f64>>,
{
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut r = residual(&x)?;
    let mut evals = 1;
    let mut cost = 0.5 * r.norm_squared();
    let mut jac = jacobian(&x)?;
    let mut lambda = -1.0;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    for it in 0..opts.max_iterations {
        iterations = it + 1;
        if cost <= 1e-300 {
            stop = StopReason::ValueTolerance;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        if projected_gradient_inf(&x, &grad, lower, upper) <= opts.gradient_tolerance * (1.0 + cost) {
            stop = StopReason::GradientTolerance;
            break;
        }
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-12)).collect();
        if lambda < 0.0 {
            lambda = 1e-3;
        }

        let mut accepted = false;
        let mut stalled = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 4.0;
                    continue;
                }
            };
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + step[i]).collect();
            clamp(&mut trial);
            let moved = trial
                .iter()
                .zip(&x)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            if moved <= opts.step_tolerance {
                stalled = true;
                break;
            }
            evals += 1;
            let trial_r = residual(&trial);
            let trial_cost = trial_r.as_ref().map(|v| 0.5 * v.norm_squared());
            match (trial_r, trial_cost) {
                (Some(tr), Some(tc)) if tc.is_finite() && tc < cost => {
                    let rel = (cost - tc) / cost;
                    x = trial;
                    r = tr;
                    cost = tc;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel <= opts.value_tolerance {
                        stop = StopReason::ValueTolerance;
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if stalled {
            stop = StopReason::StepTolerance;
            break;
        }
        if !accepted {
            stop = StopReason::LineSearchFailed;
            break;
        }
        if stop == StopReason::ValueTolerance {
            break;
        }
        jac = match jacobian(&x) {
            Some(j) => j,
            None => {
                stop = StopReason::NonFinite;
                break;
            }
        };
    }
    Some(LmReport { x, cost, iterations, residual_evaluations: evals, stop })
}

fn projected_gradient_inf(x: &[f64], g: &DVector<f64>, lo: &[f64], hi: &[f64]) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..x.len() {
        let p = (x[i] - g[i]).clamp(lo[i], hi[i]);
        m = m.max((p - x[i]).abs());
    }
    m
}
