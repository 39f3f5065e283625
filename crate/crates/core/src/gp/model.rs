use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector, Dyn};

use super::kernel::KernelSpec;
use super::GpError;
use crate::linalg::cholesky_jittered;

/// Prior mean function of a GP.
#[derive(Clone, Default)]
pub enum PriorMean {
    #[default]
    Zero,
    Constant(f64),
    /// Arbitrary callable, typically a parametric model prediction.
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMean::Zero => write!(f, "Zero"),
            PriorMean::Constant(c) => write!(f, "Constant({c})"),
            PriorMean::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl PriorMean {
    pub fn function<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        PriorMean::Function(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PriorMean::Zero => 0.0,
            PriorMean::Constant(c) => *c,
            PriorMean::Function(f) => f(x),
        }
    }

    /// Gradient of the prior mean. Callables are differentiated by central
    /// differences with step `1e-6`.
    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            PriorMean::Zero | PriorMean::Constant(_) => out.iter_mut().for_each(|v| *v = 0.0),
            PriorMean::Function(f) => {
                let h = 1e-6;
                let mut probe = x.to_vec();
                for a in 0..x.len() {
                    probe[a] = x[a] + h;
                    let fp = f(&probe);
                    probe[a] = x[a] - h;
                    let fm = f(&probe);
                    probe[a] = x[a];
                    out[a] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }
}

/// GP posterior conditioned on training data.
///
/// Immutable after construction apart from the clamp counter, so it can be
/// shared across threads for prediction.
pub struct GpModel {
    kernel: KernelSpec,
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    prior_mean: PriorMean,
    chol: nalgebra::Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    clamped: AtomicUsize,
}

impl fmt::Debug for GpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GpModel")
            .field("kernel", &self.kernel)
            .field("n", &self.len())
            .field("dim", &self.dim)
            .field("prior_mean", &self.prior_mean)
            .field("jitter", &self.jitter)
            .finish()
    }
}

impl Clone for GpModel {
    fn clone(&self) -> Self {
        Self {
            kernel: self.kernel.clone(),
            dim: self.dim,
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            prior_mean: self.prior_mean.clone(),
            chol: self.chol.clone(),
            alpha: self.alpha.clone(),
            jitter: self.jitter,
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

/// Posterior mean/variance together with derivatives over a subset of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDerivatives {
    pub mean: f64,
    pub variance: f64,
    pub mean_grad: Vec<f64>,
    pub var_grad: Vec<f64>,
    /// Row-major `coords.len() × coords.len()` Hessian of the variance.
    pub var_hessian: DMatrix<f64>,
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `(inputs, targets)`.
    pub fn new(
        kernel: KernelSpec,
        inputs: &[Vec<f64>],
        targets: &[f64],
        prior_mean: PriorMean,
    ) -> Result<Self, GpError> {
        kernel.validate()?;
        if inputs.is_empty() {
            return Err(GpError::InsufficientData { needed: 1, got: 0 });
        }
        if inputs.len() != targets.len() {
            return Err(GpError::LengthMismatch { inputs: inputs.len(), targets: targets.len() });
        }
        let dim = kernel.dim();
        if let Some(bad) = inputs.iter().find(|x| x.len() != dim) {
            return Err(GpError::DimensionMismatch { expected: dim, got: bad.len() });
        }
        let n = inputs.len();
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel.eval_unchecked(&inputs[i], &inputs[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
            gram[(i, i)] += kernel.noise_variance;
        }
        let jc = cholesky_jittered(&gram).map_err(GpError::Conditioning)?;
        let resid = DVector::from_iterator(
            n,
            inputs.iter().zip(targets).map(|(x, y)| y - prior_mean.eval(x)),
        );
        let alpha = jc.factor.solve(&resid);
        Ok(Self {
            kernel,
            dim,
            inputs: inputs.iter().flat_map(|x| x.iter().copied()).collect(),
            targets: targets.to_vec(),
            prior_mean,
            chol: jc.factor,
            alpha,
            jitter: jc.jitter,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn prior_mean(&self) -> &PriorMean {
        &self.prior_mean
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Absolute jitter that had to be added to the Gram diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Number of predictions whose variance came out negative and was clamped.
    pub fn clamped_variance_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() == self.dim {
            Ok(())
        } else {
            Err(GpError::DimensionMismatch { expected: self.dim, got: x.len() })
        }
    }

    fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), (0..self.len()).map(|i| self.kernel.eval_unchecked(x, self.input(i))))
    }

    fn clamp_variance(&self, v: f64) -> f64 {
        if v < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            0.0
        } else {
            v
        }
    }

    /// Posterior mean and (noise-free) variance at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        self.check_dim(x)?;
        let k = self.cross_cov(x);
        let mean = self.prior_mean.eval(x) + k.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a nonzero diagonal");
        let var = self.kernel.signal_variance - v.norm_squared();
        Ok((mean, self.clamp_variance(var)))
    }

    /// Gradient of the posterior mean with respect to `x`.
    pub fn mean_grad(&self, x: &[f64]) -> Result<Vec<f64>, GpError> {
        self.check_dim(x)?;
        let mut grad = vec![0.0; self.dim];
        self.prior_mean.grad(x, &mut grad);
        let mut kg = vec![0.0; self.dim];
        for i in 0..self.len() {
            self.kernel.grad_x(x, self.input(i), &mut kg);
            let a = self.alpha[i];
            for d in 0..self.dim {
                grad[d] += a * kg[d];
            }
        }
        Ok(grad)
    }

    /// Gradient and Hessian of the posterior variance with respect to `x`.
    pub fn var_grad_hess(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), GpError> {
        let coords: Vec<usize> = (0..self.dim).collect();
        let d = self.derivatives(x, &coords)?;
        Ok((d.var_grad, d.var_hessian))
    }

    /// Mean, variance and their derivatives restricted to the input coordinates
    /// listed in `coords`.
    pub fn derivatives(&self, x: &[f64], coords: &[usize]) -> Result<PredictionDerivatives, GpError> {
        self.check_dim(x)?;
        if let Some(&bad) = coords.iter().find(|&&c| c >= self.dim) {
            return Err(GpError::DimensionMismatch { expected: self.dim, got: bad + 1 });
        }
        let n = self.len();
        let m = coords.len();
        let lam = &self.kernel.lambda;

        let mut k = DVector::zeros(n);
        // ∂k_i/∂x_c for the requested coordinates
        let mut dk = DMatrix::zeros(n, m);
        let mut s_vals = vec![0.0; n];
        for i in 0..n {
            let xi = self.input(i);
            let s = self.kernel.sq_dist(x, xi);
            s_vals[i] = s;
            k[i] = self.kernel.eval_unchecked(x, xi);
            let dp = self.kernel.scaled_dprofile(s);
            for (c, &a) in coords.iter().enumerate() {
                dk[(i, c)] = 2.0 * dp * lam[a] * (x[a] - xi[a]);
            }
        }

        let mean = self.prior_mean.eval(x) + k.dot(&self.alpha);
        let l = self.chol.l_dirty();
        let v = l.solve_lower_triangular(&k).expect("nonzero diagonal");
        let variance = self.clamp_variance(self.kernel.signal_variance - v.norm_squared());
        let w = l.transpose().solve_upper_triangular(&v).expect("nonzero diagonal");

        let mut full_mean_grad = vec![0.0; self.dim];
        self.prior_mean.grad(x, &mut full_mean_grad);
        let dk_t_alpha = dk.transpose() * &self.alpha;
        let mean_grad: Vec<f64> = coords
            .iter()
            .enumerate()
            .map(|(c, &a)| full_mean_grad[a] + dk_t_alpha[c])
            .collect();

        let dk_t_w = dk.transpose() * &w;
        let var_grad: Vec<f64> = dk_t_w.iter().map(|v| -2.0 * v).collect();

        // H = -2 [ dkᵀ K⁻¹ dk + Σ_i w_i ∂²k_i ]
        let z = l.solve_lower_triangular(&dk).expect("nonzero diagonal");
        let mut hess = z.transpose() * &z;
        for i in 0..n {
            let xi = self.input(i);
            let s = s_vals[i];
            let dp = self.kernel.scaled_dprofile(s);
            let d2p = self.kernel.scaled_d2profile(s);
            let wi = w[i];
            for (c1, &a) in coords.iter().enumerate() {
                let da = x[a] - xi[a];
                for (c2, &b) in coords.iter().enumerate().skip(c1) {
                    let db = x[b] - xi[b];
                    let mut h = 4.0 * d2p * lam[a] * lam[b] * da * db;
                    if a == b {
                        h += 2.0 * dp * lam[a];
                    }
                    hess[(c1, c2)] += wi * h;
                }
            }
        }
        for c1 in 0..m {
            for c2 in c1..m {
                let v = -2.0 * hess[(c1, c2)];
                hess[(c1, c2)] = v;
                hess[(c2, c1)] = v;
            }
        }

        Ok(PredictionDerivatives { mean, variance, mean_grad, var_grad, var_hessian: hess })
    }
}
