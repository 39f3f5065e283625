use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Experiment decision variables in physical units, ordered as the owning
/// [`DesignSpace`] names them.
pub type DesignPoint = Vec<f64>;

/// Named box of design variables.
///
/// Trust regions and the design solve work in normalized coordinates where the
/// box maps onto `[-1, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DesignSpace {
    pub fn new(names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        Self { names, lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, u: &[f64]) -> DesignPoint {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    pub fn normalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0)
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> DesignPoint {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| lo + 0.5 * (v + 1.0) * (hi - lo))
            .collect()
    }

    /// Half-widths of the box, i.e. `∂u/∂z` of [`Self::denormalize`].
    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| 0.5 * (hi - lo)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn normalization_round_trip() {
        let ds = DesignSpace::new(vec!["T".into(), "F".into()], vec![60.0, 0.004], vec![100.0, 0.008]);
        let u = [79.6, 0.0069];
        let z = ds.normalize(&u);
        let back = ds.denormalize(&z);
        assert!((back[0] - u[0]).abs() < 1e-12 && (back[1] - u[1]).abs() < 1e-15);
        assert_eq!(ds.normalize(&[60.0, 0.008]), vec![-1.0, 1.0]);
    }
}
