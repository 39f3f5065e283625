use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SafeOptError;
use crate::lhs;
use crate::optim::{minimize, QnOptions};

/// Settings of the multistart penalty solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub n_starts: usize,
    pub penalty_rounds: usize,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// Largest constraint value accepted as feasible.
    pub feasibility_tolerance: f64,
    pub max_iterations: usize,
    /// Forward-difference step in normalized units.
    pub fd_step: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            n_starts: 10,
            penalty_rounds: 4,
            initial_penalty: 100.0,
            penalty_growth: 10.0,
            feasibility_tolerance: 1e-6,
            max_iterations: 50,
            fd_step: 1e-6,
        }
    }
}

/// Geometry of a design solve in normalized coordinates `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignProblem {
    pub n_constraints: usize,
    /// Current operating point; always the first start.
    pub center: Vec<f64>,
    /// Ball radius around `center`; `None` searches the whole box.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub z: Vec<f64>,
    pub objective: f64,
    pub constraints: Vec<f64>,
    /// Every constraint was at most the feasibility tolerance at `z`.
    pub feasible: bool,
    pub feasible_starts: usize,
    pub evaluations: usize,
}

/// Projects onto the ball around `center` and then onto `[-1, 1]^d`. With
/// `center` inside the box the result lies in both sets.
pub fn project_ball_box(z: &mut [f64], center: &[f64], radius: Option<f64>) {
    if let Some(r) = radius {
        let d: f64 = z.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if d > r {
            let s = if d > 0.0 { r / d } else { 0.0 };
            for (v, c) in z.iter_mut().zip(center) {
                *v = c + (*v - c) * s;
            }
        }
    }
    for v in z.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

struct Evaluator<F> {
    f: F,
    nc: usize,
    count: usize,
}

impl<F: FnMut(&[f64], &mut [f64]) -> Option<f64>> Evaluator<F> {
    fn eval(&mut self, z: &[f64], c: &mut [f64]) -> Option<f64> {
        self.count += 1;
        let v = (self.f)(z, c)?;
        (v.is_finite() && c.iter().all(|x| x.is_finite())).then_some(v)
    }

    fn augmented(&mut self, z: &[f64], lambda: &[f64], mu: f64) -> f64 {
        let mut c = vec![0.0; self.nc];
        match self.eval(z, &mut c) {
            Some(v) => {
                let pen: f64 = lambda
                    .iter()
                    .zip(&c)
                    .map(|(l, ci)| {
                        let a = (l + mu * ci).max(0.0);
                        (a * a - l * l) / (2.0 * mu)
                    })
                    .sum();
                v + pen
            }
            None => f64::INFINITY,
        }
    }
}

fn max_violation(c: &[f64]) -> f64 {
    c.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
}

/// Minimizes `objective(z)` subject to `constraints(z) ≤ 0`, the ball and the
/// normalized box.
///
/// `evaluate(z, c)` returns the objective and writes the constraint values into
/// `c`, or returns `None` when the point cannot be evaluated. Each start runs an
/// augmented-Lagrangian loop whose penalty grows every round; a start that ends
/// slightly infeasible is pulled back toward the best feasible point known so
/// far. When no start is feasible the center is returned (or, without a ball,
/// the least violating point) with `feasible = false`.
pub fn solve_design<F, R>(
    evaluate: F,
    problem: &DesignProblem,
    opts: &SolveOptions,
    rng: &mut R,
) -> Result<DesignSolution, SafeOptError>
where
    F: FnMut(&[f64], &mut [f64]) -> Option<f64>,
    R: Rng + ?Sized,
{
    let d = problem.center.len();
    if d == 0 {
        return Err(SafeOptError::Dimension(0));
    }
    let nc = problem.n_constraints;
    let center = problem.center.clone();
    let radius = problem.radius.map(|r| r.max(0.0));
    let project = |z: &mut [f64]| project_ball_box(z, &center, radius);

    let mut starts = vec![center.clone()];
    if opts.n_starts > 1 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match radius {
            Some(r) => center.iter().map(|c| ((c - r).max(-1.0), (c + r).min(1.0))).unzip(),
            None => (vec![-1.0; d], vec![1.0; d]),
        };
        for mut z in lhs::in_box(opts.n_starts - 1, &lo, &hi, rng) {
            project(&mut z);
            starts.push(z);
        }
    }
    project(&mut starts[0]);

    let mut ev = Evaluator { f: evaluate, nc, count: 0 };
    let qn = QnOptions { max_iterations: opts.max_iterations, gradient_tolerance: 1e-6, step_tolerance: 1e-7, value_tolerance: 1e-9 };

    // best feasible (objective, z, c) and least violating (violation, objective, z, c)
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut least: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    let mut anchor: Option<Vec<f64>> = None;
    let mut feasible_starts = 0;
    let mut c = vec![0.0; nc];

    for z0 in &starts {
        if ev.eval(z0, &mut c).is_some() && max_violation(&c) <= opts.feasibility_tolerance && anchor.is_none() {
            anchor = Some(z0.clone());
        }
        let mut z = z0.clone();
        let mut lambda = vec![0.0; nc];
        let mut mu = opts.initial_penalty;
        for _ in 0..opts.penalty_rounds.max(1) {
            let rep = minimize(
                |x, g| {
                    let v = ev.augmented(x, &lambda, mu);
                    if let Some(g) = g {
                        let mut probe = x.to_vec();
                        for i in 0..d {
                            // step inward at the upper box face
                            let h = if x[i] + opts.fd_step > 1.0 { -opts.fd_step } else { opts.fd_step };
                            probe[i] = x[i] + h;
                            g[i] = (ev.augmented(&probe, &lambda, mu) - v) / h;
                            probe[i] = x[i];
                        }
                    }
                    v
                },
                project,
                &z,
                &qn,
            );
            if rep.value.is_finite() {
                z = rep.x;
            }
            if ev.eval(&z, &mut c).is_none() {
                break;
            }
            let viol = max_violation(&c);
            for i in 0..nc {
                lambda[i] = (lambda[i] + mu * c[i]).max(0.0);
            }
            if viol <= opts.feasibility_tolerance {
                break;
            }
            mu *= opts.penalty_growth;
        }
        let Some(mut value) = ev.eval(&z, &mut c) else { continue };
        if max_violation(&c) > opts.feasibility_tolerance {
            if let Some(a) = &anchor {
                if let Some((zr, vr, cr)) = restore(&mut ev, &z, a, opts.feasibility_tolerance) {
                    z = zr;
                    value = vr;
                    c = cr;
                }
            }
        }
        let viol = max_violation(&c);
        if viol <= opts.feasibility_tolerance {
            feasible_starts += 1;
            if anchor.is_none() {
                anchor = Some(z.clone());
            }
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, z.clone(), c.clone()));
            }
        } else if least.as_ref().is_none_or(|l| viol < l.0 || (viol == l.0 && value < l.1)) {
            least = Some((viol, value, z.clone(), c.clone()));
        }
    }

    let evaluations = ev.count;
    log::debug!("design solve: {} evaluations, {} feasible starts", evaluations, feasible_starts);
    if let Some((objective, z, constraints)) = best {
        return Ok(DesignSolution { z, objective, constraints, feasible: true, feasible_starts, evaluations });
    }
    let Some((_, value, z, cz)) = least else {
        return Err(SafeOptError::SolveFailed { starts: starts.len() });
    };
    if radius.is_some() {
        let mut cc = vec![0.0; nc];
        let objective = ev.eval(&center, &mut cc).unwrap_or(f64::NAN);
        return Ok(DesignSolution {
            z: center.clone(),
            objective,
            constraints: cc,
            feasible: false,
            feasible_starts: 0,
            evaluations: ev.count,
        });
    }
    Ok(DesignSolution { z, objective: value, constraints: cz, feasible: false, feasible_starts: 0, evaluations })
}

/// Bisection on the segment from `z` to the feasible `anchor` for the feasible
/// point closest to `z`.
fn restore<F: FnMut(&[f64], &mut [f64]) -> Option<f64>>(
    ev: &mut Evaluator<F>,
    z: &[f64],
    anchor: &[f64],
    tol: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let mut c = vec![0.0; ev.nc];
    let point = |t: f64| -> Vec<f64> { z.iter().zip(anchor).map(|(a, b)| a + t * (b - a)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut found = None;
    for _ in 0..40 {
        let t = 0.5 * (lo + hi);
        let p = point(t);
        match ev.eval(&p, &mut c) {
            Some(v) if max_violation(&c) <= tol => {
                found = Some((p, v, c.clone()));
                hi = t;
            }
            _ => lo = t,
        }
    }
    if found.is_none() {
        let v = ev.eval(anchor, &mut c)?;
        if max_violation(&c) <= tol {
            found = Some((anchor.to_vec(), v, c));
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn unconstrained_quadratic_minimum() {
        let prob = DesignProblem { n_constraints: 0, center: vec![0.0, 0.0], radius: Some(0.8) };
        let sol = solve_design(
            |z, _| Some((z[0] - 0.2).powi(2) + 2.0 * (z[1] + 0.3).powi(2)),
            &prob,
            &SolveOptions::default(),
            &mut stream_rng(1, Stream::OptimizerStarts, 0),
        )
        .unwrap();
        assert!(sol.feasible);
        assert!((sol.z[0] - 0.2).abs() < 1e-4 && (sol.z[1] + 0.3).abs() < 1e-4, "{:?}", sol.z);
    }

    #[test]
    fn linear_constraint_is_active() {
        // min (z0-0.5)^2 + z1^2 s.t. z0 - 0.1 <= 0 -> (0.1, 0)
        let prob = DesignProblem { n_constraints: 1, center: vec![0.0, 0.0], radius: None };
        let sol = solve_design(
            |z, c| {
                c[0] = z[0] - 0.1;
                Some((z[0] - 0.5).powi(2) + z[1] * z[1])
            },
            &prob,
            &SolveOptions::default(),
            &mut stream_rng(2, Stream::OptimizerStarts, 0),
        )
        .unwrap();
        assert!(sol.feasible);
        assert!((sol.z[0] - 0.1).abs() < 1e-4 && sol.z[1].abs() < 1e-4, "{:?}", sol.z);
        assert!(sol.constraints[0] <= 1e-6);
    }

    #[test]
    fn zero_radius_returns_center() {
        let prob = DesignProblem { n_constraints: 0, center: vec![0.3, -0.2], radius: Some(0.0) };
        let sol = solve_design(|z, _| Some(z[0] + z[1]), &prob, &SolveOptions::default(), &mut stream_rng(3, Stream::OptimizerStarts, 0)).unwrap();
        assert_eq!(sol.z, vec![0.3, -0.2]);
    }

    #[test]
    fn infeasible_everywhere_returns_center() {
        let prob = DesignProblem { n_constraints: 1, center: vec![0.0], radius: Some(0.5) };
        let sol = solve_design(
            |z, c| {
                c[0] = 1.0 + z[0] * z[0];
                Some(z[0])
            },
            &prob,
            &SolveOptions { n_starts: 3, ..Default::default() },
            &mut stream_rng(4, Stream::OptimizerStarts, 0),
        )
        .unwrap();
        assert!(!sol.feasible);
        assert_eq!(sol.z, vec![0.0]);
    }
}
