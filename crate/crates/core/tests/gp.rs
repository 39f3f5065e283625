use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use safedoe_core::gp::{GpModel, KernelFamily, KernelSpec, PriorMean};

const FAMILIES: [KernelFamily; 3] = [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52];

fn kernel_value(family: KernelFamily, sf2: f64, lambda: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).zip(lambda).map(|((x, y), l)| l * (x - y).powi(2)).sum();
    let r = s.sqrt();
    sf2 * match family {
        KernelFamily::SquaredExponential => (-0.5 * s).exp(),
        KernelFamily::Matern32 => (1.0 + 3f64.sqrt() * r) * (-(3f64.sqrt()) * r).exp(),
        KernelFamily::Matern52 => (1.0 + 5f64.sqrt() * r + 5.0 * s / 3.0) * (-(5f64.sqrt()) * r).exp(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn two_point_posterior_matches_closed_form() {
    let x = vec![vec![0.2, -0.1], vec![-0.6, 0.4]];
    let y = [0.8, -0.3];
    let lambda = vec![1.5, 0.7];
    let (sf2, sn2, c) = (1.3, 1e-3, 0.25);
    for family in FAMILIES {
        let gp = GpModel::new(KernelSpec::new(family, sf2, lambda.clone(), sn2), &x, &y, PriorMean::Constant(c)).unwrap();
        let a = sf2 + sn2;
        let b = kernel_value(family, sf2, &lambda, &x[0], &x[1]);
        let det = a * a - b * b;
        for t in [vec![0.0, 0.0], vec![0.9, -0.7], vec![0.2, -0.1], vec![3.0, 3.0]] {
            let k0 = kernel_value(family, sf2, &lambda, &t, &x[0]);
            let k1 = kernel_value(family, sf2, &lambda, &t, &x[1]);
            // [k0 k1] K^-1 with K^-1 = [[a, -b], [-b, a]] / det
            let w0 = (a * k0 - b * k1) / det;
            let w1 = (a * k1 - b * k0) / det;
            let mean = c + w0 * (y[0] - c) + w1 * (y[1] - c);
            let var = sf2 - (w0 * k0 + w1 * k1);
            let (m, v) = gp.predict(&t).unwrap();
            assert!(rel(m, mean) <= 1e-10, "{family:?} mean at {t:?}: {m} vs {mean}");
            assert!(rel(v, var) <= 1e-10 || (v - var).abs() < 1e-14, "{family:?} variance at {t:?}: {v} vs {var}");
        }
    }
}

fn random_model(rng: &mut ChaCha8Rng) -> (GpModel, usize) {
    let family = FAMILIES[rng.random_range(0..3)];
    let dim = rng.random_range(1..=3);
    let n = rng.random_range(3..=8);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (2.0 * v).sin()).sum::<f64>() + rng.random_range(-0.1..0.1)).collect();
    let lambda: Vec<f64> = (0..dim).map(|_| 10f64.powf(rng.random_range(-0.5..0.7))).collect();
    let kernel = KernelSpec::new(family, rng.random_range(0.3..2.0), lambda, 10f64.powf(rng.random_range(-6.0..-2.0)));
    let prior = if rng.random_bool(0.5) { PriorMean::Zero } else { PriorMean::Constant(rng.random_range(-1.0..1.0)) };
    (GpModel::new(kernel, &xs, &ys, prior).unwrap(), dim)
}

fn close(analytic: f64, fd: f64, scale: f64) -> bool {
    (analytic - fd).abs() <= 1e-4 * fd.abs().max(scale)
}

#[test]
fn derivatives_match_finite_differences_over_random_models() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 1e-5;
    for model in 0..50 {
        let (gp, dim) = random_model(&mut rng);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
        let coords: Vec<usize> = (0..dim).collect();
        let d = gp.derivatives(&x, &coords).unwrap();
        let f = |p: &[f64]| gp.predict(p).unwrap();
        let (m0, v0) = f(&x);
        assert_eq!((d.mean, d.variance), (m0, v0));
        let scale_m = 1e-3 * (1.0 + m0.abs());
        let scale_v = 1e-3 * gp.kernel().signal_variance;
        for a in 0..dim {
            let mut p = x.clone();
            p[a] += h;
            let (mp, vp) = f(&p);
            p[a] -= 2.0 * h;
            let (mm, vm) = f(&p);
            let gm = (mp - mm) / (2.0 * h);
            let gv = (vp - vm) / (2.0 * h);
            assert!(close(d.mean_grad[a], gm, scale_m), "model {model} dm/dx{a}: {} vs {gm}", d.mean_grad[a]);
            assert!(close(d.var_grad[a], gv, scale_v), "model {model} dv/dx{a}: {} vs {gv}", d.var_grad[a]);
            let hh = 1e-4;
            for b in 0..dim {
                let vat = |da: f64, db: f64| {
                    let mut p = x.clone();
                    p[a] += da;
                    p[b] += db;
                    f(&p).1
                };
                let fd = (vat(hh, hh) - vat(hh, -hh) - vat(-hh, hh) + vat(-hh, -hh)) / (4.0 * hh * hh);
                let an = d.var_hessian[(a, b)];
                assert!(close(an, fd, scale_v), "model {model} d2v/dx{a}dx{b}: {an} vs {fd}");
            }
        }
    }
    assert!(t0.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn prediction_reverts_to_the_prior_far_from_data() {
    let x = vec![vec![0.0], vec![0.5]];
    let gp = GpModel::new(
        KernelSpec::new(KernelFamily::SquaredExponential, 0.7, vec![4.0], 1e-6),
        &x,
        &[1.0, 2.0],
        PriorMean::function(|x: &[f64]| 3.0 * x[0]),
    )
    .unwrap();
    let (m, v) = gp.predict(&[20.0]).unwrap();
    assert!((m - 60.0).abs() < 1e-12);
    assert!((v - 0.7).abs() < 1e-12);
}

#[test]
fn duplicate_noise_free_points_are_conditioned_with_jitter() {
    let x = vec![vec![0.1, 0.2], vec![0.1, 0.2], vec![0.5, -0.3]];
    let gp = GpModel::new(KernelSpec::new(KernelFamily::Matern52, 1.0, vec![1.0, 1.0], 0.0), &x, &[0.4, 0.4, -0.2], PriorMean::Zero)
        .unwrap();
    assert!(gp.jitter() > 0.0);
    let (m, v) = gp.predict(&[0.1, 0.2]).unwrap();
    assert!((m - 0.4).abs() < 1e-4);
    assert!(v < 1e-4);
}

#[test]
fn mismatched_inputs_are_rejected() {
    let k = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![1.0], 1e-4);
    assert!(GpModel::new(k.clone(), &[vec![0.0]], &[1.0, 2.0], PriorMean::Zero).is_err());
    assert!(GpModel::new(k.clone(), &[vec![0.0, 1.0]], &[1.0], PriorMean::Zero).is_err());
    assert!(GpModel::new(k.clone(), &[], &[], PriorMean::Zero).is_err());
    let gp = GpModel::new(k, &[vec![0.0]], &[1.0], PriorMean::Zero).unwrap();
    assert!(gp.predict(&[0.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_variance_lies_between_zero_and_the_prior(
        pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..12),
        probe in (-3.0f64..3.0, -3.0f64..3.0),
        fam in 0usize..3,
        l0 in 0.05f64..20.0,
        l1 in 0.05f64..20.0,
    ) {
        let xs: Vec<Vec<f64>> = pts.iter().map(|(a, b)| vec![*a, *b]).collect();
        let ys: Vec<f64> = pts.iter().map(|(a, b)| a * b).collect();
        let gp = GpModel::new(KernelSpec::new(FAMILIES[fam], 1.5, vec![l0, l1], 1e-8), &xs, &ys, PriorMean::Zero).unwrap();
        let (_, v) = gp.predict(&[probe.0, probe.1]).unwrap();
        prop_assert!((0.0..=1.5 + 1e-12).contains(&v));
    }
}
