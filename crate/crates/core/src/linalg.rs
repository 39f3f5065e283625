//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use thiserror::Error;

/// Relative jitter schedule applied to the diagonal before giving up on a
/// Cholesky factorization. Scaled by the mean diagonal entry.
pub const JITTER_SCHEDULE: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite even with relative jitter {max_jitter:e} (mean diagonal {mean_diag:e})")]
    NotPositiveDefinite { max_jitter: f64, mean_diag: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Cholesky factor together with the absolute jitter that was needed.
#[derive(Debug, Clone)]
pub struct JitteredCholesky {
    pub factor: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Factorizes `m`, first as is, then with the [`JITTER_SCHEDULE`] added to the
/// diagonal.
pub fn cholesky_jittered(m: &DMatrix<f64>) -> Result<JitteredCholesky, LinalgError> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite);
    }
    if let Some(factor) = Cholesky::new(m.clone()) {
        return Ok(JitteredCholesky { factor, jitter: 0.0 });
    }
    let n = m.nrows().max(1);
    let mean_diag = (m.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    for rel in JITTER_SCHEDULE {
        let jitter = rel * mean_diag;
        let mut shifted = m.clone();
        for i in 0..m.nrows() {
            shifted[(i, i)] += jitter;
        }
        if let Some(factor) = Cholesky::new(shifted) {
            return Ok(JitteredCholesky { factor, jitter });
        }
    }
    Err(LinalgError::NotPositiveDefinite {
        max_jitter: JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1],
        mean_diag,
    })
}

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `log det` of a symmetric positive definite matrix, `None` if the
/// factorization fails.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += 2.0 * l[(i, i)].ln();
    }
    Some(acc)
}

/// Eigen-decomposition based pseudo-inverse of a symmetric matrix. Eigenvalues
/// below `rel_tol * max |λ|` are treated as zero. Returns the inverse and the
/// numerical rank.
pub fn pinv_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(m.clone());
    let max_abs = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cutoff = rel_tol * max_abs;
    let mut inv_vals = DVector::zeros(eig.eigenvalues.len());
    let mut rank = 0;
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cutoff && lambda > 0.0 {
            inv_vals[i] = 1.0 / lambda;
            rank += 1;
        }
    }
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&inv_vals) * v.transpose();
    symmetrize(&mut out);
    (out, rank)
}

/// Raises every eigenvalue of the symmetric matrix `m` to at least `floor`.
pub fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Euclidean norm of a slice.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean distance between two slices of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
