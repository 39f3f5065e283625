use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use super::StopReason;

#[derive(Debug, Clone, Copy)]
pub struct QnOptions {
    pub max_iterations: usize,
    /// Stop when the projected gradient infinity norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when a step moves less than this (infinity norm).
    pub step_tolerance: f64,
    /// Stop when the relative decrease of the objective falls below this.
    pub value_tolerance: f64,
}

impl Default for QnOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            step_tolerance: 1e-10,
            value_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QnReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: StopReason,
}

/// Central finite-difference gradient of `f` at `x` with absolute step `h`.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64, grad: &mut [f64]) {
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
}

/// Minimizes `f` over the set described by `project` with a projected BFGS
/// iteration and Armijo backtracking along the projection arc.
///
/// `f` returns the value and, when asked, writes the gradient into its second
/// argument; trial points of the line search are evaluated without gradient.
/// `project` must map any point onto the feasible set in place; it is applied to
/// the starting point too. Coordinates held at a bound by the projection are
/// frozen for the iteration.
pub fn minimize<F, P>(mut f: F, project: P, x0: &[f64], opts: &QnOptions) -> QnReport
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
    P: Fn(&mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x);
    let mut g = vec![0.0; n];
    let mut value = f(&x, Some(&mut g));
    let mut evaluations = 1;
    if !value.is_finite() {
        return QnReport { x, value, iterations: 0, evaluations, stop: StopReason::NonFinite };
    }
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    for it in 0..opts.max_iterations {
        iterations = it + 1;
        if projected_gradient_norm(&x, &g, &project) <= opts.gradient_tolerance {
            stop = StopReason::GradientTolerance;
            break;
        }
        let blocked = blocked_coordinates(&x, &g, &project);
        let mut gv = DVector::from_column_slice(&g);
        for i in 0..n {
            if blocked[i] {
                gv[i] = 0.0;
            }
        }
        let mut dir = -(&h_inv * &gv);
        for i in 0..n {
            if blocked[i] {
                dir[i] = 0.0;
            }
        }
        if dir.dot(&gv) >= 0.0 {
            h_inv.fill_with_identity();
            scaled = false;
            dir = -gv.clone();
        }
        if !scaled {
            // unit-length first step until curvature information is available
            let big = dir.amax();
            if big > 1.0 {
                dir /= big;
            }
        }

        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-14 {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            project(&mut trial);
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - x[i])).sum();
            let trial_value = f(&trial, None);
            evaluations += 1;
            if trial_value.is_finite() && trial_value <= value + 1e-4 * decrease {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            stop = StopReason::LineSearchFailed;
            break;
        }
        let new_value = f(&trial, Some(&mut g_new));
        evaluations += 1;

        let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let step_norm = s.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let rel_decrease = (value - new_value) / value.abs().max(1e-300);
        x.copy_from_slice(&trial);
        g.copy_from_slice(&g_new);
        let old_value = value;
        value = new_value;

        if step_norm <= opts.step_tolerance {
            stop = StopReason::StepTolerance;
            break;
        }
        if (old_value - new_value).abs() <= opts.value_tolerance * (1.0 + old_value.abs())
            && rel_decrease < opts.value_tolerance.sqrt()
        {
            stop = StopReason::ValueTolerance;
            break;
        }

        let sv = DVector::from_vec(s);
        let yv = DVector::from_vec(y);
        let sy = sv.dot(&yv);
        if sy > 1e-12 * sv.norm() * yv.norm() {
            if !scaled {
                h_inv.fill_with_identity();
                h_inv *= sy / yv.norm_squared();
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &yv;
            let yhy = yv.dot(&hy);
            // BFGS inverse update
            h_inv += (&sv * sv.transpose()) * (rho * rho * yhy + rho)
                - (&hy * sv.transpose() + &sv * hy.transpose()) * rho;
        }
    }
    QnReport { x, value, iterations, evaluations, stop }
}

/// Coordinates at a bound whose descent direction points outward.
fn blocked_coordinates<P: Fn(&mut [f64])>(x: &[f64], g: &[f64], project: &P) -> Vec<bool> {
    let mut p: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - 1e-6 * b.signum() * (1.0 + a.abs())).collect();
    project(&mut p);
    p.iter()
        .zip(x)
        .zip(g)
        .map(|((pi, xi), gi)| *gi != 0.0 && (pi - xi).abs() < 1e-12 * (1.0 + xi.abs()))
        .collect()
}

fn projected_gradient_norm<P: Fn(&mut [f64])>(x: &[f64], g: &[f64], project: &P) -> f64 {
    let mut p: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
    project(&mut p);
    p.iter().zip(x).fold(0.0_f64, |a, (pi, xi)| a.max((pi - xi).abs()))
}
