//! Campaign configuration files.
//!
//! A config file is TOML with five sections:
//!
//! | section         | contents                                                        |
//! |-----------------|-----------------------------------------------------------------|
//! | `[plant]`       | true kinetics and parameters, disturbance, noise, design bounds |
//! | `[model]`       | fitted kinetics, parameter names, bounds and first guess        |
//! | `[constraints]` | violation probability and the constraint observables            |
//! | `[algorithm]`   | estimation, surrogate, trust-region and solver settings         |
//! | `[campaign]`    | case name, methods, seeds, iteration cap, preliminary runs      |
//!
//! Units: temperatures in °C, concentrations in mol/L, activation energies in
//! kJ/mol (case 2 stores them divided by 10 next to `ln k` at 90 °C).
//! Flowrates are used as given: the plug-flow residence time is
//! `length_cm · area_cm2 / F` and the mixed-feed one `volume_ml / ΣF`. The
//! built-in files `case1.toml` and `case2.toml` document every field.

use std::fmt;
use std::path::{Path, PathBuf};

use safedoe_core::campaign::{CampaignConfig, McSettings, Method, MismatchSettings, MleSettings};
use safedoe_core::design::SurrogateConfig;
use safedoe_core::kinetics::{ConstraintObservable, DesignSpace, Disturbance, KineticModel, PlantSpec};
use safedoe_core::safe_opt::{SolveOptions, TrustRegionParams};
use safedoe_core::CaseStudy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CASE1_TOML: &str = include_str!("../configs/case1.toml");
pub const CASE2_TOML: &str = include_str!("../configs/case2.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub plant: PlantSection,
    pub model: ModelSection,
    pub constraints: ConstraintsSection,
    pub algorithm: AlgorithmSection,
    pub campaign: CampaignSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// Parameters of `kinetics`, ordered `(k0, Ea)` per reaction.
    pub theta: Vec<f64>,
    /// Standard deviation of the Gaussian noise on each species.
    pub noise_std: Vec<f64>,
    pub disturbance: Disturbance,
    pub design_space: DesignSpace,
    pub kinetics: KineticModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub theta_names: Vec<String>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    pub theta_initial: Vec<f64>,
    /// Noise level assumed by estimation and design.
    pub measurement_std: Vec<f64>,
    pub kinetics: KineticModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    /// Allowed violation probability of every constraint.
    pub epsilon: f64,
    pub observables: Vec<ConstraintObservable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub alpha_j: f64,
    pub tol1: f64,
    pub significance: f64,
    pub surrogate_refit_iterations: usize,
    pub trust_region: TrustRegionParams,
    pub mle: MleSettings,
    pub surrogate: SurrogateConfig,
    pub mismatch: MismatchSettings,
    pub solve: SolveOptions,
    pub mc: McSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub name: String,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub max_iterations: usize,
    pub initial_experiments: Vec<Vec<f64>>,
}

/// Config that failed to parse or validate; `path` names the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

impl ConfigFile {
    /// Config of a built-in case study with the default algorithm settings.
    pub fn from_case(case: &CaseStudy, cfg: &CampaignConfig, methods: Vec<Method>, seeds: Vec<u64>) -> Self {
        Self {
            plant: PlantSection {
                theta: case.plant.theta.clone(),
                noise_std: case.plant.noise_std.clone(),
                disturbance: case.plant.disturbance.clone(),
                design_space: case.plant.design_space.clone(),
                kinetics: case.plant.model.clone(),
            },
            model: ModelSection {
                theta_names: case.theta_names.clone(),
                theta_lower: case.theta_lower.clone(),
                theta_upper: case.theta_upper.clone(),
                theta_initial: case.theta_initial.clone(),
                measurement_std: case.measurement_std.clone(),
                kinetics: case.model.clone(),
            },
            constraints: ConstraintsSection { epsilon: cfg.epsilon, observables: case.plant.constraints.clone() },
            algorithm: AlgorithmSection {
                alpha_j: cfg.alpha_j,
                tol1: cfg.tol1,
                significance: cfg.significance,
                surrogate_refit_iterations: cfg.surrogate_refit_iterations,
                trust_region: cfg.trust_region,
                mle: cfg.mle.clone(),
                surrogate: cfg.surrogate.clone(),
                mismatch: cfg.mismatch.clone(),
                solve: cfg.solve.clone(),
                mc: cfg.mc,
            },
            campaign: CampaignSection {
                name: case.name.clone(),
                methods,
                seeds,
                max_iterations: cfg.max_iterations,
                initial_experiments: case.initial_experiments.clone(),
            },
        }
    }

    /// Parses TOML, reporting the dotted path of the first bad field.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            err(&path, inner.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Built-in config by name (`case1`, `case2`).
    pub fn builtin(name: &str) -> Option<Self> {
        let text = builtin_text(name)?;
        Some(Self::parse(text).expect("built-in configs are valid"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn case_study(&self) -> CaseStudy {
        CaseStudy {
            name: self.campaign.name.clone(),
            plant: PlantSpec {
                model: self.plant.kinetics.clone(),
                theta: self.plant.theta.clone(),
                disturbance: self.plant.disturbance.clone(),
                noise_std: self.plant.noise_std.clone(),
                design_space: self.plant.design_space.clone(),
                constraints: self.constraints.observables.clone(),
            },
            model: self.model.kinetics.clone(),
            theta_names: self.model.theta_names.clone(),
            theta_lower: self.model.theta_lower.clone(),
            theta_upper: self.model.theta_upper.clone(),
            theta_initial: self.model.theta_initial.clone(),
            measurement_std: self.model.measurement_std.clone(),
            initial_experiments: self.campaign.initial_experiments.clone(),
        }
    }

    pub fn campaign_config(&self, method: Method, seed: u64) -> CampaignConfig {
        let a = &self.algorithm;
        CampaignConfig {
            method,
            seed,
            alpha_j: a.alpha_j,
            epsilon: self.constraints.epsilon,
            trust_region: a.trust_region,
            tol1: a.tol1,
            max_iterations: self.campaign.max_iterations,
            significance: a.significance,
            mle: a.mle.clone(),
            surrogate: a.surrogate.clone(),
            surrogate_refit_iterations: a.surrogate_refit_iterations,
            mismatch: a.mismatch.clone(),
            solve: a.solve.clone(),
            mc: a.mc,
        }
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.campaign.methods.is_empty() {
            return Err(err("campaign.methods", "at least one method is required"));
        }
        if self.campaign.seeds.is_empty() {
            return Err(err("campaign.seeds", "at least one seed is required"));
        }
        let np_true = self.plant.kinetics.n_params();
        if self.plant.theta.len() != np_true {
            return Err(err("plant.theta", format!("expected {np_true} values, got {}", self.plant.theta.len())));
        }
        let ns = self.plant.kinetics.n_species();
        if self.plant.noise_std.len() != ns {
            return Err(err("plant.noise_std", format!("expected {ns} values, got {}", self.plant.noise_std.len())));
        }
        if self.plant.noise_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(err("plant.noise_std", "standard deviations must be nonnegative"));
        }
        if self.plant.disturbance.scale.len() != ns || self.plant.disturbance.offset.len() != ns {
            return Err(err("plant.disturbance", format!("scale and offset need {ns} entries")));
        }
        let d = &self.plant.design_space;
        if d.names.len() != d.lower.len() || d.lower.len() != d.upper.len() {
            return Err(err("plant.design_space", "names, lower and upper must have equal lengths"));
        }
        if d.lower.iter().zip(&d.upper).any(|(l, u)| !(l < u)) {
            return Err(err("plant.design_space", "every lower bound must be below its upper bound"));
        }
        let np = self.model.kinetics.n_params();
        for (name, v) in [
            ("model.theta_names", self.model.theta_names.len()),
            ("model.theta_lower", self.model.theta_lower.len()),
            ("model.theta_upper", self.model.theta_upper.len()),
            ("model.theta_initial", self.model.theta_initial.len()),
        ] {
            if v != np {
                return Err(err(name, format!("expected {np} values, got {v}")));
            }
        }
        if self.model.measurement_std.len() != self.model.kinetics.n_species() {
            return Err(err("model.measurement_std", "one entry per species is required"));
        }
        if self.model.measurement_std.iter().any(|s| !(*s > 0.0)) {
            return Err(err("model.measurement_std", "standard deviations must be positive"));
        }
        for (i, o) in self.constraints.observables.iter().enumerate() {
            if o.species >= ns {
                return Err(err(&format!("constraints.observables[{i}].species"), format!("species index {} out of range", o.species)));
            }
        }
        if self.constraints.observables.is_empty() {
            return Err(err("constraints.observables", "at least one constraint is required"));
        }
        for (i, u) in self.campaign.initial_experiments.iter().enumerate() {
            if !d.contains(u) {
                return Err(err(&format!("campaign.initial_experiments[{i}]"), format!("{u:?} lies outside the design space")));
            }
        }
        self.case_study().validate().map_err(|e| err("", e.to_string()))?;
        self.campaign_config(self.campaign.methods[0], 0)
            .validate()
            .map_err(|m| err(algorithm_path(&m), m))?;
        Ok(())
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Checksum of everything that shapes a single campaign: the config
    /// without its method and seed lists.
    pub fn campaign_sha256(&self) -> String {
        let mut c = self.clone();
        c.campaign.methods.clear();
        c.campaign.seeds.clear();
        c.sha256()
    }
}

/// Best guess at the field a campaign-config validation message refers to.
fn algorithm_path(message: &str) -> &'static str {
    const FIELDS: [(&str, &str); 8] = [
        ("alpha_j", "algorithm.alpha_j"),
        ("epsilon", "constraints.epsilon"),
        ("tol1", "algorithm.tol1"),
        ("significance", "algorithm.significance"),
        ("trust", "algorithm.trust_region"),
        ("surrogate", "algorithm.surrogate"),
        ("solve", "algorithm.solve"),
        ("Monte-Carlo", "algorithm.mc"),
    ];
    FIELDS.iter().find(|(k, _)| message.contains(k)).map(|(_, p)| *p).unwrap_or("algorithm")
}

pub fn builtin_text(name: &str) -> Option<&'static str> {
    match name {
        "case1" | "case1.toml" => Some(CASE1_TOML),
        "case2" | "case2.toml" => Some(CASE2_TOML),
        _ => None,
    }
}

/// Where a config came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    Builtin(&'static str),
    File(PathBuf),
}

impl fmt::Display for ConfigSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigSource::Builtin(n) => write!(f, "builtin:{n}"),
            ConfigSource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Loads a config file, falling back to the built-in of the same name when
/// no such file exists.
pub fn load(path: &Path) -> Result<(ConfigFile, ConfigSource), ConfigError> {
    if path.exists() {
        let text = std::fs::read_to_string(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
        return Ok((ConfigFile::parse(&text)?, ConfigSource::File(path.to_path_buf())));
    }
    let name = path.to_string_lossy();
    match builtin_text(&name) {
        Some(text) => {
            let name = if name.starts_with("case1") { "case1" } else { "case2" };
            Ok((ConfigFile::parse(text)?, ConfigSource::Builtin(name)))
        }
        None => Err(err("", format!("config {} not found (built-ins: case1, case2)", path.display()))),
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_match_the_library_cases() {
        for (name, case) in [("case1", CaseStudy::case1()), ("case2", CaseStudy::case2())] {
            let file = ConfigFile::builtin(name).unwrap();
            assert_eq!(file.case_study(), case, "{name}");
            for m in Method::ALL {
                let mut expected = CampaignConfig::for_case(&case, m, 5);
                expected.max_iterations = file.campaign.max_iterations;
                assert_eq!(file.campaign_config(m, 5), expected, "{name} {m}");
            }
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for name in ["case1", "case2"] {
            let a = ConfigFile::builtin(name).unwrap();
            let b = ConfigFile::parse(&a.to_toml()).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.to_toml(), b.to_toml());
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = CASE1_TOML.replace("eta1 = 0.001", "eta1 = \"small\"");
        let e = ConfigFile::parse(&text).unwrap_err();
        assert_eq!(e.path, "algorithm.trust_region.eta1");

        let text = CASE1_TOML.replace("alpha_j = 0.5", "alpha_j = 0.5\nalpha_k = 1.0");
        let e = ConfigFile::parse(&text).unwrap_err();
        assert!(e.message.contains("alpha_k"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let text = CASE1_TOML.replace("epsilon = 0.1", "epsilon = 1.5");
        assert_eq!(ConfigFile::parse(&text).unwrap_err().path, "constraints.epsilon");
        let mut c = ConfigFile::builtin("case1").unwrap();
        c.campaign.initial_experiments[2][0] = 150.0;
        assert_eq!(c.validate().unwrap_err().path, "campaign.initial_experiments[2]");
        let mut c = ConfigFile::builtin("case2").unwrap();
        c.plant.theta.pop();
        assert_eq!(c.validate().unwrap_err().path, "plant.theta");
    }

    #[test]
    fn algorithm_defaults() {
        let c = ConfigFile::builtin("case1").unwrap();
        let tr = c.algorithm.trust_region;
        assert_eq!((tr.eta1, tr.eta2, tr.t1, tr.t2, tr.t3), (1e-3, 1e-2, 2.0, 0.5, 0.5));
        assert_eq!(c.constraints.epsilon, 0.1);
        assert_eq!(c.algorithm.alpha_j, 0.5);
        assert_eq!(c.algorithm.surrogate.size, 200);
        assert_eq!(ConfigFile::builtin("case2").unwrap().algorithm.surrogate.size, 400);
    }
}
