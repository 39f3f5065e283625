use proptest::prelude::*;
use safedoe_core::gp::{GpModel, KernelFamily, KernelSpec, PriorMean};
use safedoe_core::rng::{stream_rng, Stream};
use safedoe_core::safe_opt::{
    cantelli_r, project_ball_box, solve_design, ChanceConstraint, DesignProblem, SolveOptions, TrustRegion,
    TrustRegionParams,
};

#[test]
fn cantelli_factor_at_one_percent() {
    assert!((cantelli_r(0.01).unwrap() - 9.9499).abs() <= 1e-3);
    assert!(cantelli_r(0.0).is_err());
    assert!(cantelli_r(1.0).is_err());
    assert!(cantelli_r(f64::NAN).is_err());
}

#[test]
fn expansion_and_contraction_thresholds() {
    let p = TrustRegionParams::default();
    let tr = TrustRegion::new(&p);
    assert_eq!(tr.update(&p, 1e-4).radius, 2.0 * p.initial_radius);
    assert_eq!(tr.update(&p, 0.05).radius, 0.5 * p.initial_radius);
    assert_eq!(tr.update(&p, p.eta1).radius, 2.0 * p.initial_radius);
    assert_eq!(tr.update(&p, p.eta2).radius, 0.5 * p.initial_radius);
    assert_eq!(tr.step(&p, 1e-4, true).radius, p.initial_radius);
}

#[test]
fn tightening_adds_r_standard_deviations() {
    let x = vec![vec![0.0], vec![1.0]];
    let gp = GpModel::new(KernelSpec::new(KernelFamily::SquaredExponential, 0.5, vec![2.0], 1e-6), &x, &[-0.2, -0.4], PriorMean::Constant(-0.3))
        .unwrap();
    let c = ChanceConstraint::new(0, "g".into(), 0.1, gp).unwrap();
    let t = c.tightened(&[0.4]).unwrap();
    assert!((t.value - (t.mean + 3.0 * t.variance.sqrt())).abs() < 1e-12);
    assert!(ChanceConstraint::new(0, "g".into(), 1.5, c.gp.clone()).is_err());
}

#[test]
fn solution_stays_in_the_ball_and_box() {
    // unconstrained minimum at (2, 2) lies outside both
    let prob = DesignProblem { n_constraints: 0, center: vec![0.5, 0.0], radius: Some(0.3) };
    let sol = solve_design(
        |z, _| Some((z[0] - 2.0).powi(2) + (z[1] - 2.0).powi(2)),
        &prob,
        &SolveOptions::default(),
        &mut stream_rng(1, Stream::OptimizerStarts, 0),
    )
    .unwrap();
    let d = ((sol.z[0] - 0.5).powi(2) + sol.z[1].powi(2)).sqrt();
    assert!(d <= 0.3 + 1e-12);
    assert!(sol.z.iter().all(|v| (-1.0..=1.0).contains(v)));
    // the ball lies inside the box, so the optimum is on the ray toward (2, 2)
    let dir = [1.5f64, 2.0];
    let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    let expected = [0.5 + 0.3 * dir[0] / n, 0.3 * dir[1] / n];
    assert!((sol.z[0] - expected[0]).abs() < 1e-3 && (sol.z[1] - expected[1]).abs() < 1e-3, "{:?}", sol.z);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cantelli_factor_falls_as_the_allowed_probability_grows(a in 1e-6f64..0.999_999, b in 1e-6f64..0.999_999) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(lo < hi);
        prop_assert!(cantelli_r(lo).unwrap() > cantelli_r(hi).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_lands_in_ball_and_box(
        z in prop::collection::vec(-5.0f64..5.0, 3),
        c in prop::collection::vec(-1.0f64..1.0, 3),
        r in 0.0f64..2.0,
    ) {
        let mut p = z.clone();
        project_ball_box(&mut p, &c, Some(r));
        let d: f64 = p.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(d <= r + 1e-12);
        prop_assert!(p.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn radii_stay_positive_and_follow_the_rules(rhos in prop::collection::vec((0.0f64..0.1, any::<bool>()), 1..30)) {
        let p = TrustRegionParams::default();
        let mut tr = TrustRegion::new(&p);
        for (rho, violated) in rhos {
            let next = tr.step(&p, rho, violated);
            let factor = next.radius / tr.radius;
            let base = if rho <= p.eta1 { p.t1 } else if rho >= p.eta2 { p.t2 } else { 1.0 };
            let expect = if violated { base * p.t3 } else { base };
            prop_assert!((factor - expect).abs() < 1e-12);
            prop_assert!(next.radius > 0.0);
            tr = next;
        }
    }

    #[test]
    fn solve_respects_ball_radius(cx in -0.8f64..0.8, cy in -0.8f64..0.8, r in 0.01f64..0.5, tx in -3.0f64..3.0, ty in -3.0f64..3.0) {
        let prob = DesignProblem { n_constraints: 0, center: vec![cx, cy], radius: Some(r) };
        let sol = solve_design(
            |z, _| Some((z[0] - tx).powi(2) + (z[1] - ty).powi(2)),
            &prob,
            &SolveOptions { n_starts: 2, ..Default::default() },
            &mut stream_rng(0, Stream::OptimizerStarts, 0),
        ).unwrap();
        let d = ((sol.z[0] - cx).powi(2) + (sol.z[1] - cy).powi(2)).sqrt();
        prop_assert!(d <= r + 1e-9);
        prop_assert!(sol.z.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
