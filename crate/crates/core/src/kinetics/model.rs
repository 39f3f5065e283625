use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::KineticsError;

/// Universal gas constant in J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;
/// Reference temperature of the centered parametrization, in °C.
pub const REFERENCE_TEMPERATURE_C: f64 = 90.0;
const KELVIN: f64 = 273.15;

/// How each `(k⁰, E)` pair maps to a rate constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parametrization {
    /// `k = k⁰ exp(−E / (R T))` with `E` in kJ/mol.
    Standard,
    /// `k = exp(k⁰ − E·10⁴/R (1/T − 1/T_ref))` with `T_ref` = 90 °C.
    Centered,
}

/// Rate constant at `t_celsius`.
pub fn arrhenius(param: Parametrization, k0: f64, e: f64, t_celsius: f64) -> f64 {
    let t = t_celsius + KELVIN;
    match param {
        Parametrization::Standard => k0 * (-e * 1e3 / (GAS_CONSTANT * t)).exp(),
        Parametrization::Centered => {
            let t_ref = REFERENCE_TEMPERATURE_C + KELVIN;
            (k0 - e * 1e4 / GAS_CONSTANT * (1.0 / t - 1.0 / t_ref)).exp()
        }
    }
}

/// Power-law reaction `r = k Π c_i^{order_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    /// Stoichiometric coefficient of every species (negative for reagents).
    pub stoichiometry: Vec<f64>,
    /// Reaction order in every species.
    pub orders: Vec<f64>,
}

impl Reaction {
    fn rate(&self, k: f64, c: &[f64]) -> f64 {
        let mut r = k;
        for (ci, &o) in c.iter().zip(&self.orders) {
            if o == 0.0 {
                continue;
            }
            r *= if o == 1.0 { *ci } else { ci.max(0.0).powf(o) };
        }
        r
    }
}

/// Reactor type and its fixed geometry.
///
/// The first design variable is always the temperature in °C. A plug-flow
/// reactor takes one flowrate, a mixed-feed reactor one flowrate per feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Reactor {
    /// Isothermal tube, integrated along its length:
    /// `dc/dz = (A/F) Σ_j a_j r_j` over `z ∈ [0, L]`.
    PlugFlow { length_cm: f64, area_cm2: f64, inlet: Vec<f64> },
    /// Feeds of fixed stock concentration mixed at the inlet, integrated over
    /// the residence time `τ = V / ΣF`.
    MixedFeed { volume_ml: f64, feeds: Vec<Vec<f64>> },
}

/// Kinetic model: species, reactions, parametrization and reactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticModel {
    pub species: Vec<String>,
    pub reactions: Vec<Reaction>,
    pub parametrization: Parametrization,
    pub reactor: Reactor,
    /// Number of fixed RK4 steps.
    pub steps: usize,
}

struct Setup {
    c0: Vec<f64>,
    span: f64,
    scale: f64,
    k: Vec<f64>,
}

impl KineticModel {
    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_params(&self) -> usize {
        2 * self.reactions.len()
    }

    pub fn design_dim(&self) -> usize {
        match &self.reactor {
            Reactor::PlugFlow { .. } => 2,
            Reactor::MixedFeed { feeds, .. } => 1 + feeds.len(),
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let n = self.n_species();
        if n == 0 || self.reactions.is_empty() {
            return Err(KineticsError::InvalidModel("need at least one species and one reaction"));
        }
        if self.reactions.iter().any(|r| r.stoichiometry.len() != n || r.orders.len() != n) {
            return Err(KineticsError::InvalidModel("reaction vectors must have one entry per species"));
        }
        if self.steps == 0 {
            return Err(KineticsError::InvalidModel("steps must be positive"));
        }
        match &self.reactor {
            Reactor::PlugFlow { length_cm, area_cm2, inlet } => {
                if inlet.len() != n || !(*length_cm > 0.0 && *area_cm2 > 0.0) {
                    return Err(KineticsError::InvalidModel("plug-flow geometry or inlet invalid"));
                }
            }
            Reactor::MixedFeed { volume_ml, feeds } => {
                if feeds.is_empty() || feeds.iter().any(|f| f.len() != n) || !(*volume_ml > 0.0) {
                    return Err(KineticsError::InvalidModel("mixed-feed volume or feeds invalid"));
                }
            }
        }
        Ok(())
    }

    fn setup(&self, u: &[f64], theta: &[f64]) -> Result<Setup, KineticsError> {
        if u.len() != self.design_dim() {
            return Err(KineticsError::DesignDimension { expected: self.design_dim(), got: u.len() });
        }
        if theta.len() != self.n_params() {
            return Err(KineticsError::ParameterDimension { expected: self.n_params(), got: theta.len() });
        }
        let fail = || KineticsError::IntegrationFailed { u: u.to_vec(), theta: theta.to_vec() };
        let t = u[0];
        let k: Vec<f64> = theta
            .chunks_exact(2)
            .map(|p| arrhenius(self.parametrization, p[0], p[1], t))
            .collect();
        if k.iter().any(|v| !v.is_finite()) {
            return Err(fail());
        }
        let (c0, span, scale) = match &self.reactor {
            Reactor::PlugFlow { length_cm, area_cm2, inlet } => {
                let f = u[1];
                if !(f > 0.0) {
                    return Err(fail());
                }
                (inlet.clone(), *length_cm, area_cm2 / f)
            }
            Reactor::MixedFeed { volume_ml, feeds } => {
                let total: f64 = u[1..].iter().sum();
                if !(total > 0.0) {
                    return Err(fail());
                }
                let mut c0 = vec![0.0; self.n_species()];
                for (f, stock) in u[1..].iter().zip(feeds) {
                    for (c, s) in c0.iter_mut().zip(stock) {
                        *c += f * s / total;
                    }
                }
                (c0, volume_ml / total, 1.0)
            }
        };
        Ok(Setup { c0, span, scale, k })
    }

    fn rhs(&self, k: &[f64], scale: f64, c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (rx, &kj) in self.reactions.iter().zip(k) {
            let r = rx.rate(kj, c);
            for (o, a) in out.iter_mut().zip(&rx.stoichiometry) {
                *o += scale * a * r;
            }
        }
    }

    /// Outlet concentrations (mol/L) with the default fixed-step integrator.
    pub fn integrate(&self, u: &[f64], theta: &[f64]) -> Result<Vec<f64>, KineticsError> {
        self.integrate_with_steps(u, theta, self.steps)
    }

    /// Classical fourth-order Runge–Kutta with `steps` equal steps.
    pub fn integrate_with_steps(&self, u: &[f64], theta: &[f64], steps: usize) -> Result<Vec<f64>, KineticsError> {
        let s = self.setup(u, theta)?;
        let n = self.n_species();
        let h = s.span / steps.max(1) as f64;
        let mut c = s.c0;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..steps.max(1) {
            self.rhs(&s.k, s.scale, &c, &mut k1);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k1[i];
            }
            self.rhs(&s.k, s.scale, &tmp, &mut k2);
            for i in 0..n {
                tmp[i] = c[i] + 0.5 * h * k2[i];
            }
            self.rhs(&s.k, s.scale, &tmp, &mut k3);
            for i in 0..n {
                tmp[i] = c[i] + h * k3[i];
            }
            self.rhs(&s.k, s.scale, &tmp, &mut k4);
            for i in 0..n {
                c[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(KineticsError::IntegrationFailed { u: u.to_vec(), theta: theta.to_vec() });
        }
        Ok(c)
    }

    /// Adaptive Dormand–Prince 5(4) integration to relative tolerance `rtol`.
    /// Slow; intended for reference checks of the fixed-step integrator.
    pub fn integrate_reference(&self, u: &[f64], theta: &[f64], rtol: f64) -> Result<Vec<f64>, KineticsError> {
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
            [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
            [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let s = self.setup(u, theta)?;
        let n = self.n_species();
        let fail = || KineticsError::IntegrationFailed { u: u.to_vec(), theta: theta.to_vec() };
        let atol = rtol * 1e-3;
        let mut c = s.c0;
        let mut t = 0.0;
        let mut h = s.span / 1000.0;
        let mut ks = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut iterations = 0usize;
        while t < s.span {
            iterations += 1;
            if iterations > 10_000_000 {
                return Err(fail());
            }
            h = h.min(s.span - t);
            self.rhs(&s.k, s.scale, &c, &mut ks[0]);
            for stage in 0..6 {
                for i in 0..n {
                    let mut acc = c[i];
                    for j in 0..=stage {
                        acc += h * A[stage][j] * ks[j][i];
                    }
                    tmp[i] = acc;
                }
                self.rhs(&s.k, s.scale, &tmp, &mut ks[stage + 1]);
            }
            // tmp now holds the fifth-order solution (FSAL row)
            let mut err = 0.0_f64;
            for i in 0..n {
                let e: f64 = (0..7).map(|j| E[j] * ks[j][i]).sum::<f64>() * h;
                let sc = atol + rtol * c[i].abs().max(tmp[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                return Err(fail());
            }
            if err <= 1.0 {
                t += h;
                c.copy_from_slice(&tmp);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < s.span * 1e-14 {
                return Err(fail());
            }
        }
        Ok(c)
    }

    /// `∂c_out/∂θ` by forward differences with relative step `1e-6`
    /// (absolute `1e-6` for zero entries). Rows are species, columns parameters.
    pub fn sensitivities(&self, u: &[f64], theta: &[f64]) -> Result<DMatrix<f64>, KineticsError> {
        let base = self.integrate(u, theta)?;
        self.sensitivities_from(u, theta, &base)
    }

    /// As [`Self::sensitivities`], reusing an already computed outlet state.
    pub fn sensitivities_from(&self, u: &[f64], theta: &[f64], base: &[f64]) -> Result<DMatrix<f64>, KineticsError> {
        let mut jac = DMatrix::zeros(self.n_species(), theta.len());
        let mut probe = theta.to_vec();
        for j in 0..theta.len() {
            let h = if theta[j] != 0.0 { 1e-6 * theta[j].abs() } else { 1e-6 };
            probe[j] = theta[j] + h;
            let shifted = self.integrate(u, &probe)?;
            probe[j] = theta[j];
            for i in 0..self.n_species() {
                jac[(i, j)] = (shifted[i] - base[i]) / h;
            }
        }
        Ok(jac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_form_at_reference_temperature() {
        assert!((arrhenius(Parametrization::Centered, 0.7, 3.1, 90.0) - 0.7_f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn zero_activation_energy_is_temperature_independent() {
        for p in [Parametrization::Standard, Parametrization::Centered] {
            let a = arrhenius(p, 1.3, 0.0, 60.0);
            let b = arrhenius(p, 1.3, 0.0, 100.0);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn standard_form_reference_value() {
        // 8 exp(-29000 / (8.314 * 363.15))
        let k = arrhenius(Parametrization::Standard, 8.0, 29.0, 90.0);
        let expected = 8.0 * (-29000.0_f64 / (8.314 * 363.15)).exp();
        assert!((k - expected).abs() < 1e-18);
    }
}
