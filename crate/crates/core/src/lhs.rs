//! Latin hypercube designs.

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

/// `n` points of a Latin hypercube in `[0, 1)^dim`.
pub fn unit_hypercube<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut points = alloc::vec![alloc::vec![0.0; dim]; n];
    if n == 0 {
        return points;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, p) in points.iter_mut().enumerate() {
            let jitter: f64 = rng.random();
            p[d] = (perm[i] as f64 + jitter) / n as f64;
        }
    }
    points
}

/// Latin hypercube scaled to the box `[lower, upper]`.
pub fn in_box<R: Rng + ?Sized>(n: usize, lower: &[f64], upper: &[f64], rng: &mut R) -> Vec<Vec<f64>> {
    debug_assert_eq!(lower.len(), upper.len());
    unit_hypercube(n, lower.len(), rng)
        .into_iter()
        .map(|p| {
            p.iter()
                .zip(lower.iter().zip(upper))
                .map(|(t, (lo, hi))| lo + t * (hi - lo))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn one_point_per_stratum() {
        let mut rng = stream_rng(3, Stream::Lhs, 0);
        let n = 17;
        let pts = unit_hypercube(n, 3, &mut rng);
        for d in 0..3 {
            let mut seen = alloc::vec![false; n];
            for p in &pts {
                let bin = (p[d] * n as f64) as usize;
                assert!(!seen[bin]);
                seen[bin] = true;
            }
        }
    }
}
