//! Aggregated tool configuration: one schema-validated JSON file covering
//! the behavioral parameters, the unstructured-road model, occlusion
//! handling, the driving policy, and simulation defaults. All quantities
//! are SI (meters, seconds, m/s, m/s^2) unless a field says otherwise.
//! Unknown or ill-typed keys are rejected on load.

use crate::occlusion::{ImproperSearchParams, SpeedLimits};
use crate::policy::{PolicyConfig, RewardConfig};
use crate::rss_core::RssParameters;
use crate::unstructured::UnstructuredParams;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config rejected (bad JSON, unknown key, or wrong type): {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Occlusion handling: speeds assumed for agents hidden behind occluders
/// and the backward search that discards hypotheses no compliant history
/// could reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OcclusionConfig {
    pub hidden_limits: SpeedLimits,
    pub search: ImproperSearchParams,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        OcclusionConfig {
            hidden_limits: SpeedLimits::occluded_default(true, 15.0),
            search: ImproperSearchParams::default(),
        }
    }
}

/// Values a scenario file may leave unspecified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimDefaults {
    /// Physics timestep (s); must lie in [1 ms, 100 ms].
    pub timestep: f64,
    /// Policy replanning period (s); a multiple of the physics step.
    pub policy_period: f64,
    /// Scenario duration (s).
    pub duration: f64,
}

impl Default for SimDefaults {
    fn default() -> Self {
        SimDefaults { timestep: 0.01, policy_period: 0.1, duration: 60.0 }
    }
}

/// Everything the tools need, in one file. Every section falls back to its
/// documented default when omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub rss: RssParameters,
    pub unstructured: UnstructuredParams,
    pub occlusion: OcclusionConfig,
    pub policy: PolicyConfig,
    pub reward: RewardConfig,
    pub sim: SimDefaults,
}

const MIN_TIMESTEP: f64 = 1e-3;
const MAX_TIMESTEP: f64 = 0.1;

impl Config {
    /// Checks every section's internal consistency and the cross-section
    /// constraints, returning the (possibly normalized) configuration.
    pub fn validated(self) -> Result<Self, ConfigError> {
        let invalid = |msg: String| ConfigError::Invalid(msg);
        let rss = self.rss.validated().map_err(|e| invalid(e.to_string()))?;
        self.unstructured.lon.validated().map_err(|e| invalid(format!("unstructured: {e}")))?;
        let u = &self.unstructured;
        if u.epsilon <= 0.0 || u.step <= 0.0 || u.horizon <= 0.0 {
            return Err(invalid("unstructured epsilon, step, and horizon must be positive".into()));
        }
        let hidden_limits = self
            .occlusion
            .hidden_limits
            .validated()
            .map_err(|e| invalid(format!("occlusion limits: {e}")))?;
        let s = &self.occlusion.search;
        if s.dt <= 0.0 || s.horizon < s.dt || s.accel_levels < 2 || s.v_cap <= 0.0 {
            return Err(invalid(
                "occlusion search needs dt > 0, horizon >= dt, >= 2 accel levels, v_cap > 0"
                    .into(),
            ));
        }
        let policy = self.policy.validated().map_err(|e| invalid(format!("policy: {e}")))?;
        let reward = self.reward.validated().map_err(|e| invalid(format!("reward: {e}")))?;
        let sim = self.sim;
        if !(MIN_TIMESTEP..=MAX_TIMESTEP).contains(&sim.timestep) {
            return Err(invalid(format!(
                "physics timestep must lie in [{MIN_TIMESTEP}, {MAX_TIMESTEP}] s, got {}",
                sim.timestep
            )));
        }
        if sim.policy_period + 1e-12 < sim.timestep {
            return Err(invalid("policy period must be at least one physics step".into()));
        }
        if sim.duration <= 0.0 {
            return Err(invalid("duration must be positive".into()));
        }
        Ok(Config {
            rss,
            unstructured: self.unstructured,
            occlusion: OcclusionConfig { hidden_limits, search: self.occlusion.search },
            policy,
            reward,
            sim,
        })
    }

    /// Parses and validates a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validated()
    }

    /// Reads, parses, and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = Config::default().validated().unwrap();
        let text = cfg.to_json_pretty();
        let back = Config::from_json(&text).unwrap();
        assert_eq!(cfg, back);
        // The documented defaults.
        assert_eq!(cfg.rss.rho, 0.5);
        assert_eq!(cfg.sim.timestep, 0.01);
        assert_eq!(cfg.sim.policy_period, 0.1);
        // An empty document means "all defaults".
        assert_eq!(Config::from_json("{}").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        assert!(matches!(
            Config::from_json(r#"{"turbo": true}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            Config::from_json(r#"{"rss": {"rho": 0.5, "swagger": 1.0}}"#),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            Config::from_json(r#"{"sim": {"timestep": "fast"}}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn semantic_validation_catches_bad_values() {
        let out_of_range = Config::from_json(r#"{"sim": {"timestep": 0.5}}"#);
        assert!(matches!(out_of_range, Err(ConfigError::Invalid(_))), "{out_of_range:?}");
        let bad_brakes =
            Config::from_json(r#"{"rss": {"a_min_brake": 9.0}}"#); // exceeds a_max_brake default 8
        assert!(matches!(bad_brakes, Err(ConfigError::Invalid(_))), "{bad_brakes:?}");
        let period = Config::from_json(r#"{"sim": {"timestep": 0.05, "policy_period": 0.01}}"#);
        assert!(matches!(period, Err(ConfigError::Invalid(_))));
        // Partial overrides of a section keep the rest of its defaults.
        let cfg = Config::from_json(r#"{"rss": {"rho": 1.0}}"#).unwrap();
        assert_eq!(cfg.rss.rho, 1.0);
        assert_eq!(cfg.rss.a_max_brake, 8.0);
    }

    #[test]
    fn load_reads_files_and_reports_io_errors() {
        let dir = std::env::temp_dir();
        let path = dir.join(format!("rsskit-config-test-{}.json", std::process::id()));
        std::fs::write(&path, Config::default().to_json_pretty()).unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg, Config::default());
        std::fs::remove_file(&path).unwrap();
        assert!(matches!(Config::load(&path), Err(ConfigError::Io(_))));
    }
}
