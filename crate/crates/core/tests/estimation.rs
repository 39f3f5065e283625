use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safedoe_core::estimation::distributions::{chi_squared_quantile, student_t_quantile};
use safedoe_core::estimation::{laplace_posterior, mle_fit, statistics, Dataset, EstimationError, MleConfig};
use safedoe_core::kinetics::Measurement;
use safedoe_core::CaseStudy;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

#[test]
fn chi_squared_reference_value() {
    let q = chi_squared_quantile(0.95, 56.0);
    assert!((q - 74.47).abs() <= 0.05, "{q}");
}

#[test]
fn quantiles_agree_with_statrs() {
    for dof in [1.0, 2.0, 5.0, 9.0, 30.0, 56.0, 200.0] {
        for p in [0.05, 0.5, 0.9, 0.95, 0.975, 0.999] {
            let c = ChiSquared::new(dof).unwrap().inverse_cdf(p);
            assert!((chi_squared_quantile(p, dof) - c).abs() <= 1e-6 * c.max(1.0), "chi2 {p} {dof}");
            let t = StudentsT::new(0.0, 1.0, dof).unwrap().inverse_cdf(p);
            assert!((student_t_quantile(p, dof) - t).abs() <= 1e-6 * t.abs().max(1.0), "t {p} {dof}");
        }
    }
}

/// Noise-free outputs of the exact model of case 2 at `designs`.
fn exact_data(case: &CaseStudy, designs: &[Vec<f64>]) -> Vec<Measurement> {
    designs.iter().enumerate().map(|(i, u)| case.plant.run_experiment(u, 0, i).unwrap()).collect()
}

fn designs() -> Vec<Vec<f64>> {
    let mut out = CaseStudy::case2().initial_experiments;
    out.extend([
        vec![70.0, 0.5, 2.5, 0.5],
        vec![110.0, 2.8, 0.6, 1.0],
        vec![90.0, 1.2, 1.2, 0.4],
        vec![65.0, 2.0, 2.0, 2.0],
        vec![115.0, 0.7, 1.5, 2.5],
    ]);
    out
}

#[test]
fn zero_residual_fit_recovers_the_truth_and_passes() {
    let case = CaseStudy::case2().mismatch_free();
    let data = exact_data(&case, &designs());
    let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
    let cfg = MleConfig { lower: case.theta_lower.clone(), upper: case.theta_upper.clone(), n_starts: 3, max_iterations: 200 };
    let fit = mle_fit(&ds, &case.theta_initial, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(fit.chi_squared < 1e-12, "{}", fit.chi_squared);
    for (a, b) in fit.theta.iter().zip(&case.plant.theta) {
        assert!(((a - b) / b).abs() < 1e-6, "{a} vs {b}");
    }
    let post = laplace_posterior(&ds, &fit.theta).unwrap();
    let rep = statistics(&fit.theta, &post.covariance, fit.chi_squared, ds.n_observations(), 0.05).unwrap();
    assert!(rep.chi_squared_pass);
    assert_eq!(rep.dof, 50 - 8);
}

#[test]
fn too_few_observations_is_an_error() {
    let case = CaseStudy::case2().mismatch_free();
    let data = exact_data(&case, &designs()[..1]);
    let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
    let post = laplace_posterior(&ds, &case.plant.theta).unwrap();
    assert!(post.rank_deficient);
    let err = statistics(&case.plant.theta, &post.covariance, 0.0, ds.n_observations(), 0.05).unwrap_err();
    assert_eq!(err, EstimationError::NonPositiveDof(-3));
    let empty = Dataset { model: &case.model, data: &[], std: &case.measurement_std };
    let cfg = MleConfig { lower: case.theta_lower.clone(), upper: case.theta_upper.clone(), n_starts: 1, max_iterations: 10 };
    assert_eq!(mle_fit(&empty, &case.theta_initial, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err(), EstimationError::NoData);
}

#[test]
fn wald_intervals_cover_the_truth() {
    let mut case = CaseStudy::case2().mismatch_free();
    case.plant.noise_std = case.measurement_std.clone();
    let designs = designs();
    let cfg = MleConfig { lower: case.theta_lower.clone(), upper: case.theta_upper.clone(), n_starts: 1, max_iterations: 100 };
    let (mut covered, mut total) = (0, 0);
    for rep in 0..60u64 {
        let data: Vec<Measurement> =
            designs.iter().enumerate().map(|(i, u)| case.plant.run_experiment(u, 1000 + rep, i).unwrap()).collect();
        let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
        let fit = mle_fit(&ds, &case.plant.theta, &cfg, &mut ChaCha8Rng::seed_from_u64(rep)).unwrap();
        let post = laplace_posterior(&ds, &fit.theta).unwrap();
        let report = statistics(&fit.theta, &post.covariance, fit.chi_squared, ds.n_observations(), 0.05).unwrap();
        for ((est, half), truth) in fit.theta.iter().zip(report.confidence_half_widths(0.05)).zip(&case.plant.theta) {
            total += 1;
            covered += usize::from((est - truth).abs() <= half);
        }
    }
    let rate = covered as f64 / total as f64;
    assert!((0.9..=0.99).contains(&rate), "coverage {rate}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn another_experiment_never_loses_information(t in 60.0f64..120.0, f1 in 0.3f64..3.0, f2 in 0.3f64..3.0, f3 in 0.3f64..3.0) {
        let case = CaseStudy::case2().mismatch_free();
        let mut data = exact_data(&case, &designs()[..5]);
        let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
        let before = ds.information(&case.plant.theta).unwrap();
        data.push(case.plant.run_experiment(&[t, f1, f2, f3], 0, 5).unwrap());
        let ds = Dataset { model: &case.model, data: &data, std: &case.measurement_std };
        let after = ds.information(&case.plant.theta).unwrap();
        let gain = SymmetricEigen::new(&after - &before).eigenvalues.min();
        prop_assert!(gain >= -1e-9 * before.amax());
    }
}
