use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use safedoe_core::design::{d_metric, propagate, propagate_gp, FimSpec, ObjectiveSurrogate, SurrogateConfig};
use safedoe_core::gp::{gp_fit, GpModel, HyperFitConfig, KernelFamily, PriorMean};
use safedoe_core::kinetics::DesignSpace;
use safedoe_core::CaseStudy;

fn sin_gp() -> GpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![-2.0 + 4.0 * i as f64 / 19.0]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0].sin() + noise.sample(&mut rng)).collect();
    gp_fit(&xs, &ys, KernelFamily::SquaredExponential, PriorMean::Zero, &HyperFitConfig::default()).unwrap()
}

#[test]
fn taylor_moments_agree_with_monte_carlo_on_the_sin_fixture() {
    let t0 = Instant::now();
    let gp = sin_gp();
    let (mu, var) = (0.1, 0.01);
    let p = propagate_gp(&gp, &[mu], &[0], &DMatrix::from_element(1, 1, var)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let input = Normal::new(mu, var.sqrt()).unwrap();
    let n = 100_000;
    let (mut s, mut s2, mut sv) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let (m, v) = gp.predict(&[input.sample(&mut rng)]).unwrap();
        s += m;
        s2 += m * m;
        sv += v;
    }
    let mc_mean = s / n as f64;
    let mc_var = sv / n as f64 + s2 / n as f64 - mc_mean * mc_mean;
    assert!((p.mean - mc_mean).abs() <= 0.15 * mc_mean.abs(), "{} vs {mc_mean}", p.mean);
    assert!((p.variance - mc_var).abs() <= 0.15 * mc_var, "{} vs {mc_var}", p.variance);
    assert!(t0.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn zero_input_covariance_reproduces_the_prediction() {
    let gp = sin_gp();
    for x in [-1.7, 0.1, 0.55, 2.4] {
        let p = propagate_gp(&gp, &[x], &[0], &DMatrix::zeros(1, 1)).unwrap();
        let (m, v) = gp.predict(&[x]).unwrap();
        assert!((p.mean - m).abs() <= 1e-12 * m.abs().max(1.0));
        assert!((p.variance - v).abs() <= 1e-12 * v.abs().max(1e-300) || p.variance == v);
    }
}

fn surrogate(size: usize) -> ObjectiveSurrogate {
    let space = DesignSpace::new(vec!["a".into(), "b".into()], vec![0.0, -1.0], vec![2.0, 1.0]);
    let cfg = SurrogateConfig {
        size,
        family: KernelFamily::Matern52,
        hyper: HyperFitConfig { n_multistarts: 3, ..Default::default() },
        box_sigmas: 3.0,
    };
    ObjectiveSurrogate::train_with(
        |u, th| Some((u[0] - 1.0).powi(2) + 0.5 * u[1] * th[0] + th[0].sin()),
        1,
        &space,
        vec![0.3],
        vec![0.2],
        &cfg,
        &mut ChaCha8Rng::seed_from_u64(2),
        None,
    )
    .unwrap()
}

#[test]
fn surrogate_predicts_held_out_points() {
    let s = surrogate(80);
    let truth = |u: &[f64], th: f64| (u[0] - 1.0).powi(2) + 0.5 * u[1] * th + th.sin();
    let mut worst: f64 = 0.0;
    for (a, b, th) in [(0.3, 0.2, 0.25), (1.7, -0.8, 0.45), (1.0, 0.0, 0.3), (0.1, 0.9, 0.15), (1.4, 0.5, 0.4)] {
        let (m, _) = s.predict(&[a, b], &[th]).unwrap();
        worst = worst.max((m - truth(&[a, b], th)).abs());
    }
    // targets span about 1.5
    assert!(worst < 0.02, "worst holdout error {worst}");
    assert_eq!(s.training_inputs.len(), 80);
    assert!(s.training_inputs.iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn surrogate_propagation_without_parameter_uncertainty_is_the_prediction() {
    let s = surrogate(40);
    let p = propagate(&s, &[0.7, 0.3], &[0.35], &DMatrix::zeros(1, 1)).unwrap();
    let (m, v) = s.predict(&[0.7, 0.3], &[0.35]).unwrap();
    assert!((p.mean - m).abs() < 1e-12);
    assert!((p.variance - v).abs() < 1e-12);
    // parameter uncertainty can only add variance through the mean slope term
    let wide = propagate(&s, &[0.7, 0.3], &[0.35], &DMatrix::from_element(1, 1, 0.01)).unwrap();
    assert!(wide.variance >= p.variance - 1e-9);
}

#[test]
fn fisher_information_is_the_weighted_sensitivity_product() {
    let case = CaseStudy::case1();
    let spec = FimSpec::from_std(&case.measurement_std, 4);
    let theta = [5.0, 30.0, 1.0, 30.0];
    let u = [80.0, 0.006];
    let f = spec.fim(&case.model, &u, &theta).unwrap();
    let s = case.model.sensitivities(&u, &theta).unwrap();
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, case.measurement_std.iter().map(|s| 1.0 / (s * s))));
    let expected = s.transpose() * w * &s;
    assert!((&f - &expected).amax() <= 1e-9 * expected.amax());
}

#[test]
fn d_metric_of_diagonal_information() {
    let f = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 5.0, 0.5]));
    let expected = -(2.0f64 * 5.0 * 0.5).ln();
    assert!((d_metric(&f) - expected).abs() < 1e-8);
    // more information never raises the loss
    let more = &f + DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 0.0]));
    assert!(d_metric(&more) < d_metric(&f));
}
