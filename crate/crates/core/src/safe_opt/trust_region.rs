use serde::{Deserialize, Serialize};

use super::SafeOptError;

/// Update parameters of the per-constraint trust regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionParams {
    pub eta1: f64,
    pub eta2: f64,
    /// Expansion factor, `t1 > 1`.
    pub t1: f64,
    /// Contraction factor, `t2 < 1`.
    pub t2: f64,
    /// Contraction after an observed violation, `t3 < 1`.
    pub t3: f64,
    /// Initial radius in normalized design units.
    pub initial_radius: f64,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self { eta1: 1e-3, eta2: 1e-2, t1: 2.0, t2: 0.5, t3: 0.5, initial_radius: 0.3 }
    }
}

impl TrustRegionParams {
    pub fn validate(&self) -> Result<(), SafeOptError> {
        let pos = [self.eta1, self.eta2, self.t1, self.t2, self.t3, self.initial_radius];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SafeOptError::InvalidTrustRegion("all parameters must be positive and finite"));
        }
        if self.eta1 > self.eta2 {
            return Err(SafeOptError::InvalidTrustRegion("eta1 must not exceed eta2"));
        }
        if !(self.t2 < 1.0 && 1.0 < self.t1) {
            return Err(SafeOptError::InvalidTrustRegion("need t2 < 1 < t1"));
        }
        if self.t3 >= 1.0 {
            return Err(SafeOptError::InvalidTrustRegion("need t3 < 1"));
        }
        Ok(())
    }
}

/// Squared relative prediction error `((g − ĝ)/g)²`, with `|g|` floored at 1e-6.
pub fn prediction_accuracy(observed: f64, predicted: f64) -> f64 {
    let denom = if observed.abs() < 1e-6 { 1e-6 } else { observed.abs() };
    let e = (observed - predicted) / denom;
    e * e
}

/// Radius of one constraint's trust region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    pub radius: f64,
}

impl TrustRegion {
    pub fn new(params: &TrustRegionParams) -> Self {
        Self { radius: params.initial_radius }
    }

    /// Accuracy-driven update: expand when `ρ ≤ η₁`, contract when `ρ ≥ η₂`.
    pub fn update(self, params: &TrustRegionParams, rho: f64) -> Self {
        let radius = if rho <= params.eta1 {
            self.radius * params.t1
        } else if rho >= params.eta2 {
            self.radius * params.t2
        } else {
            self.radius
        };
        Self { radius }
    }

    /// Contraction after the constraint was observed violated.
    pub fn backtrack(self, params: &TrustRegionParams) -> Self {
        Self { radius: self.radius * params.t3 }
    }

    /// Full per-experiment step: accuracy update followed by the violation
    /// contraction. Replaying recorded `(ρ, violated)` pairs through this
    /// reproduces a campaign's radii.
    pub fn step(self, params: &TrustRegionParams, rho: f64, violated: bool) -> Self {
        let next = self.update(params, rho);
        if violated {
            next.backtrack(params)
        } else {
            next
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_rules() {
        let p = TrustRegionParams::default();
        let tr = TrustRegion::new(&p);
        assert_eq!(tr.update(&p, 1e-4).radius, 0.6);
        assert_eq!(tr.update(&p, 0.05).radius, 0.15);
        assert_eq!(tr.update(&p, 5e-3).radius, 0.3);
        assert_eq!(tr.step(&p, 5e-3, true).radius, 0.15);
    }

    #[test]
    fn rho_guard() {
        assert_eq!(prediction_accuracy(0.2, 0.1), 0.25);
        assert!((prediction_accuracy(0.0, 1e-7) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = TrustRegionParams { t1: 0.9, ..Default::default() };
        assert!(p.validate().is_err());
        let p = TrustRegionParams { t3: 1.0, ..Default::default() };
        assert!(p.validate().is_err());
        assert!(TrustRegionParams::default().validate().is_ok());
    }
}
