use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{MuDistribution, MuSpec};
use crate::types::TypeIndex;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the master seed of a config file.
pub const SEED_ENV: &str = "EXCHWALK_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Velocity,
    Concentration,
    Persistence,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Velocity => "velocity",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::Persistence => "persistence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "velocity" => Ok(ExperimentKind::Velocity),
            "concentration" => Ok(ExperimentKind::Concentration),
            "persistence" => Ok(ExperimentKind::Persistence),
            other => Err(Error::InvalidInput(format!(
                "unknown experiment kind `{other}` (velocity, concentration, persistence)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WalkEngine {
    /// Exact annealed sampling through the revealed particles only.
    Revealed,
    /// Graphical construction on a buffered window.
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VelocityParams {
    pub gammas: Vec<f64>,
    pub include_infinite: bool,
    pub steps: usize,
    pub epsilon: f64,
    /// Projection direction; `null` projects along the annealed drift.
    pub direction: Option<Vec<f64>>,
    pub engine: WalkEngine,
    pub delta_trunc: f64,
}

impl Default for VelocityParams {
    fn default() -> Self {
        Self {
            gammas: vec![0.5, 5.0, 50.0],
            include_infinite: true,
            steps: 2000,
            epsilon: 0.1,
            direction: None,
            engine: WalkEngine::Revealed,
            delta_trunc: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcentrationParams {
    pub gamma: f64,
    pub t: f64,
    pub radii: Vec<u32>,
    pub a_grid: Vec<f64>,
    /// Type whose density is tracked; `null` picks the type of the first atom.
    pub type_index: Option<Vec<u32>>,
    pub delta_trunc: f64,
    pub mass_budget: f64,
}

impl Default for ConcentrationParams {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            t: 1.0,
            radii: vec![4, 8, 16],
            a_grid: vec![0.1],
            type_index: None,
            delta_trunc: 1e-9,
            mass_budget: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PersistenceParams {
    pub gamma: f64,
    /// Radius `L` of the good-start conditioning.
    pub l: u32,
    /// Largest radius checked when conditioning `eta(0)`.
    pub l_max: u32,
    pub j_grid: Vec<u32>,
    /// Largest radius checked at time `t`.
    pub j_max: u32,
    /// `gamma t`; `null` means `1.1 L^3`.
    pub gamma_t: Option<f64>,
    pub rejection_cap: u64,
    /// Samples used for `p_k` when `mu` has no atoms.
    pub type_budget: usize,
}

impl Default for PersistenceParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            l: 16,
            l_max: 32,
            j_grid: vec![4, 8, 12],
            j_max: 16,
            gamma_t: None,
            rejection_cap: 100_000,
            type_budget: 100_000,
        }
    }
}

impl PersistenceParams {
    pub fn resolved_gamma_t(&self) -> f64 {
        self.gamma_t.unwrap_or(1.1 * (self.l as f64).powi(3))
    }
}

/// One experiment run. Unknown keys are rejected; every omitted key takes
/// its documented default and is echoed back in the results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Worker threads; `null` uses every available core. Results do not
    /// depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    pub mu: MuSpec,
    #[serde(default)]
    pub velocity: VelocityParams,
    #[serde(default)]
    pub concentration: ConcentrationParams,
    #[serde(default)]
    pub persistence: PersistenceParams,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn default_replicas() -> usize {
    200
}

fn default_confidence() -> f64 {
    0.99
}

/// Values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub replicas: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, mu: MuSpec) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            kind,
            seed: 0,
            replicas: default_replicas(),
            workers: None,
            confidence: default_confidence(),
            mu,
            velocity: VelocityParams::default(),
            concentration: ConcentrationParams::default(),
            persistence: PersistenceParams::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `flags > env > file` precedence and validates the result.
    pub fn resolve(mut self, flags: &Overrides, env_seed: Option<&str>) -> Result<Self> {
        if let Some(text) = env_seed {
            self.seed = text.trim().parse().map_err(|_| {
                Error::InvalidInput(format!("{SEED_ENV}={text:?} is not an unsigned integer"))
            })?;
        }
        if let Some(seed) = flags.seed {
            self.seed = seed;
        }
        if let Some(w) = flags.workers {
            self.workers = Some(w);
        }
        if let Some(r) = flags.replicas {
            self.replicas = r;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn distribution(&self) -> Result<MuDistribution> {
        self.mu.distribution()
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return bad(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.replicas == 0 {
            return bad("replicas must be >= 1".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return bad(format!("confidence {} must be in (0, 1)", self.confidence));
        }
        let mu = self.distribution()?;
        let d = mu.dim();
        match self.kind {
            ExperimentKind::Velocity => {
                let p = &self.velocity;
                if p.gammas.is_empty() && !p.include_infinite {
                    return bad("velocity sweep needs at least one gamma cell".into());
                }
                if let Some(g) = p.gammas.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
                    return bad(format!("gamma {g} must be positive and finite"));
                }
                if p.steps == 0 {
                    return bad("steps must be >= 1".into());
                }
                if !(p.epsilon > 0.0) {
                    return bad("epsilon must be > 0".into());
                }
                if let Some(dir) = &p.direction {
                    if dir.len() != d {
                        return Err(Error::DimensionMismatch {
                            expected: d,
                            got: dir.len(),
                        });
                    }
                }
                if !(p.delta_trunc > 0.0 && p.delta_trunc < 1.0) {
                    return bad("delta_trunc must be in (0, 1)".into());
                }
            }
            ExperimentKind::Concentration => {
                let p = &self.concentration;
                if !(p.gamma > 0.0) || !(p.t >= 0.0) {
                    return bad("concentration needs gamma > 0 and t >= 0".into());
                }
                if p.radii.is_empty() || p.radii.contains(&0) {
                    return bad("radii must be a nonempty list of positive integers".into());
                }
                if p.a_grid.is_empty() || p.a_grid.iter().any(|a| !(*a >= 0.0)) {
                    return bad("a_grid must be a nonempty list of values >= 0".into());
                }
                if let Some(k) = &p.type_index {
                    if k.len() != 2 * d {
                        return Err(Error::DimensionMismatch {
                            expected: 2 * d,
                            got: k.len(),
                        });
                    }
                }
                if !(p.delta_trunc > 0.0 && p.delta_trunc < 1.0) || !(p.mass_budget > 0.0) {
                    return bad("delta_trunc must be in (0, 1) and mass_budget > 0".into());
                }
            }
            ExperimentKind::Persistence => {
                let p = &self.persistence;
                if !(p.gamma > 0.0) {
                    return bad("gamma must be > 0".into());
                }
                if p.l == 0 || p.l_max < p.l {
                    return bad("need 1 <= L <= L_max".into());
                }
                if p.j_grid.is_empty() || p.j_grid.iter().any(|j| *j == 0 || *j >= p.l) {
                    return Err(Error::Precondition(format!(
                        "every J must satisfy 1 <= J < L = {}",
                        p.l
                    )));
                }
                if p.j_grid.iter().any(|j| *j > p.j_max) {
                    return bad("j_max must be at least every J".into());
                }
                let gt = p.resolved_gamma_t();
                if !(gt > (p.l as f64).powi(3)) {
                    return Err(Error::Precondition(format!(
                        "gamma t = {gt} must exceed L^3 = {}",
                        (p.l as f64).powi(3)
                    )));
                }
                if p.rejection_cap == 0 || p.type_budget == 0 {
                    return bad("rejection_cap and type_budget must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn type_index(&self) -> Result<Option<TypeIndex>> {
        Ok(self.concentration.type_index.as_ref().map(|coords| TypeIndex {
            coords: coords.clone(),
            resolution: self.mu.resolution,
        }))
    }
}

/// Parses `EXCHWALK_SEED` from the process environment, if set.
pub fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MU: &str = r#"{"d": 1, "N": 4, "atoms": [
        {"probs": [0.1, 0.9], "weight": 0.8},
        {"probs": [0.9, 0.1], "weight": 0.2}]}"#;

    #[test]
    fn defaults_are_filled() {
        let text = format!(r#"{{"kind": "velocity", "mu": {MU}}}"#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.replicas, 200);
        assert_eq!(cfg.velocity.gammas, vec![0.5, 5.0, 50.0]);
        let echo = cfg.to_json_pretty().unwrap();
        assert_eq!(ExperimentConfig::from_json(&echo).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!(r#"{{"kind": "velocity", "mu": {MU}, "colour": 3}}"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
        let text = format!(r#"{{"kind": "velocity", "mu": {MU}, "velocity": {{"stepz": 3}}}}"#);
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn precedence() {
        let text = format!(r#"{{"kind": "velocity", "seed": 5, "mu": {MU}}}"#);
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg.clone().resolve(&Overrides::default(), None).unwrap().seed, 5);
        assert_eq!(cfg.clone().resolve(&Overrides::default(), Some("9")).unwrap().seed, 9);
        let flags = Overrides {
            seed: Some(11),
            ..Default::default()
        };
        assert_eq!(cfg.clone().resolve(&flags, Some("9")).unwrap().seed, 11);
        assert!(cfg.resolve(&Overrides::default(), Some("x")).is_err());
    }

    #[test]
    fn persistence_preconditions() {
        let text = format!(
            r#"{{"kind": "persistence", "mu": {MU}, "persistence": {{"l": 8, "j_grid": [8], "j_max": 8}}}}"#
        );
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Precondition(_))));
        let text = format!(
            r#"{{"kind": "persistence", "mu": {MU}, "persistence": {{"l": 8, "j_grid": [4], "j_max": 8, "gamma_t": 100}}}}"#
        );
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Precondition(_))));
    }
}
