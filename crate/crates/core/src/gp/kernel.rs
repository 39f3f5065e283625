use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::GpError;

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

/// Stationary covariance families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern32,
    Matern52,
}

/// Kernel family plus hyperparameters.
///
/// Distances are measured as `r² = Σ λ_a (x_a − x'_a)²`, so `lambda` holds
/// inverse squared lengthscales: larger entries mean faster decay along that
/// input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub signal_variance: f64,
    pub lambda: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, signal_variance: f64, lambda: Vec<f64>, noise_variance: f64) -> Self {
        Self { family, signal_variance, lambda, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn validate(&self) -> Result<(), GpError> {
        let ok = self.signal_variance > 0.0
            && self.signal_variance.is_finite()
            && self.noise_variance >= 0.0
            && self.noise_variance.is_finite()
            && self.lambda.iter().all(|l| *l > 0.0 && l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidHyperparameters)
        }
    }

    /// `k(x, x')` with dimension checks.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64, GpError> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                got: if x.len() != self.dim() { x.len() } else { y.len() },
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..x.len() {
            let d = x[a] - y[a];
            s += self.lambda[a] * d * d;
        }
        s
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.signal_variance * profile(self.family, self.sq_dist(x, y))
    }

    /// `σ² φ'(s)` where `φ` is the kernel profile as a function of `s = r²`.
    #[inline]
    pub(crate) fn scaled_dprofile(&self, s: f64) -> f64 {
        self.signal_variance * dprofile(self.family, s)
    }

    /// `σ² φ''(s)`; the Matérn 3/2 profile has a removable `1/r` singularity
    /// whose contribution vanishes at `s = 0`, so it is reported as zero there.
    #[inline]
    pub(crate) fn scaled_d2profile(&self, s: f64) -> f64 {
        self.signal_variance * d2profile(self.family, s)
    }

    /// Gradient of `k(x, y)` with respect to `x`, written into `out`.
    pub fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = self.sq_dist(x, y);
        let dp = self.scaled_dprofile(s);
        for a in 0..x.len() {
            out[a] = 2.0 * dp * self.lambda[a] * (x[a] - y[a]);
        }
    }
}

#[inline]
pub(crate) fn profile(family: KernelFamily, s: f64) -> f64 {
    match family {
        KernelFamily::SquaredExponential => (-0.5 * s).exp(),
        KernelFamily::Matern32 => {
            let r = s.max(0.0).sqrt();
            (1.0 + SQRT3 * r) * (-SQRT3 * r).exp()
        }
        KernelFamily::Matern52 => {
            let r = s.max(0.0).sqrt();
            (1.0 + SQRT5 * r + 5.0 / 3.0 * s) * (-SQRT5 * r).exp()
        }
    }
}

#[inline]
pub(crate) fn dprofile(family: KernelFamily, s: f64) -> f64 {
    match family {
        KernelFamily::SquaredExponential => -0.5 * (-0.5 * s).exp(),
        KernelFamily::Matern32 => {
            let r = s.max(0.0).sqrt();
            -1.5 * (-SQRT3 * r).exp()
        }
        KernelFamily::Matern52 => {
            let r = s.max(0.0).sqrt();
            -5.0 / 6.0 * (1.0 + SQRT5 * r) * (-SQRT5 * r).exp()
        }
    }
}

#[inline]
pub(crate) fn d2profile(family: KernelFamily, s: f64) -> f64 {
    match family {
        KernelFamily::SquaredExponential => 0.25 * (-0.5 * s).exp(),
        KernelFamily::Matern32 => {
            let r = s.max(0.0).sqrt();
            if r < 1e-300 {
                0.0
            } else {
                0.75 * SQRT3 * (-SQRT3 * r).exp() / r
            }
        }
        KernelFamily::Matern52 => {
            let r = s.max(0.0).sqrt();
            25.0 / 12.0 * (-SQRT5 * r).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const FAMILIES: [KernelFamily; 3] =
        [KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52];

    #[test]
    fn zero_distance_gives_signal_variance() {
        for fam in FAMILIES {
            let k = KernelSpec::new(fam, 2.7, vec![0.3, 4.0], 0.0);
            assert_eq!(k.eval(&[0.2, -1.0], &[0.2, -1.0]).unwrap(), 2.7);
        }
    }

    #[test]
    fn squared_exponential_reference_value() {
        // (x-x')ᵀ(x-x') = 2 with Λ = I
        let k = KernelSpec::new(KernelFamily::SquaredExponential, 1.0, vec![1.0, 1.0], 0.0);
        let v = k.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let k = KernelSpec::new(KernelFamily::Matern52, 1.0, vec![1.0, 1.0], 0.0);
        assert!(matches!(k.eval(&[1.0], &[0.0, 1.0]), Err(GpError::DimensionMismatch { .. })));
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        for fam in FAMILIES {
            for &s in &[0.05, 0.7, 2.3] {
                let h = 1e-6;
                let fd1 = (profile(fam, s + h) - profile(fam, s - h)) / (2.0 * h);
                let fd2 = (dprofile(fam, s + h) - dprofile(fam, s - h)) / (2.0 * h);
                assert!((fd1 - dprofile(fam, s)).abs() < 1e-7, "{fam:?} s={s}");
                assert!((fd2 - d2profile(fam, s)).abs() < 1e-6 * (1.0 + fd2.abs()), "{fam:?} s={s}");
            }
        }
    }
}
