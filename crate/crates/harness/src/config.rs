//! Experiment configuration, read from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use aec_core::controller::{ControllerConfig, Mode};
use aec_core::domain::{DomainSchema, RuleSet};
use aec_core::environment::{EnvInstanceConfig, OracleConfig};
use aec_core::predictor::SyntheticPredictorConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSettings {
    pub accuracy: f64,
    pub ensemble_size: usize,
    pub noise_scale: f64,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        let d = SyntheticPredictorConfig::default();
        PredictorSettings {
            accuracy: d.accuracy,
            ensemble_size: d.ensemble_size,
            noise_scale: d.noise_scale,
        }
    }
}

impl PredictorSettings {
    pub fn with_seed(&self, seed: u64) -> SyntheticPredictorConfig {
        SyntheticPredictorConfig {
            accuracy: self.accuracy,
            ensemble_size: self.ensemble_size,
            noise_scale: self.noise_scale,
            seed,
        }
    }
}

/// Changes to the schema's own entailment rules, as seen by the controller.
/// The simulated world always uses the schema rules unchanged.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSettings {
    /// Extra rules in schema syntax, e.g. `rule r1: in(?o, ?s), ?s : sinkbasin => !clean(?o)`.
    pub extra: Vec<String>,
    /// Ids of schema rules to switch off.
    pub disabled: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementSettings {
    pub iterations: usize,
    pub episodes: usize,
    pub disable_threshold: usize,
    pub recalibrate: bool,
    /// Hidden worlds sampled per soundness sweep.
    pub sweep_worlds: usize,
}

impl Default for RefinementSettings {
    fn default() -> Self {
        RefinementSettings {
            iterations: 4,
            episodes: 500,
            disable_threshold: 2,
            recalibrate: true,
            sweep_worlds: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSettings {
    pub modes: Vec<Mode>,
}

impl Default for AblationSettings {
    fn default() -> Self {
        AblationSettings {
            modes: Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub episodes: usize,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub write_traces: bool,
    /// Commits needed before a bound check is conclusive.
    pub min_commits: usize,
    pub environment: EnvInstanceConfig,
    pub oracle: OracleConfig,
    pub predictor: PredictorSettings,
    pub controller: ControllerConfig,
    pub rules: RuleSettings,
    pub refinement: RefinementSettings,
    pub ablation: AblationSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            episodes: 1000,
            parallelism: 0,
            output_dir: PathBuf::from("aec-out"),
            write_traces: true,
            min_commits: 100,
            environment: EnvInstanceConfig::default(),
            oracle: OracleConfig::default(),
            predictor: PredictorSettings::default(),
            controller: ControllerConfig::default(),
            rules: RuleSettings::default(),
            refinement: RefinementSettings::default(),
            ablation: AblationSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.environment.validate().map_err(|e| invalid(e.to_string()))?;
        self.oracle.validate().map_err(|e| invalid(e.to_string()))?;
        self.controller.validate().map_err(invalid)?;
        let p = &self.predictor;
        if !(0.0..=1.0).contains(&p.accuracy) {
            return Err(invalid(format!("predictor.accuracy must lie in [0, 1], got {}", p.accuracy)));
        }
        if p.ensemble_size == 0 {
            return Err(invalid("predictor.ensemble_size must be positive".into()));
        }
        if !(p.noise_scale >= 0.0 && p.noise_scale.is_finite()) {
            return Err(invalid(format!("predictor.noise_scale must be finite and non-negative, got {}", p.noise_scale)));
        }
        if self.refinement.disable_threshold == 0 {
            return Err(invalid("refinement.disable_threshold must be positive".into()));
        }
        if self.ablation.modes.is_empty() {
            return Err(invalid("ablation.modes is empty".into()));
        }
        self.controller_rules()?;
        Ok(())
    }

    /// The controller's rule set: schema rules, minus disabled, plus extras.
    pub fn controller_rules(&self) -> Result<RuleSet, ConfigError> {
        let schema = self.environment.schema();
        let mut rules = schema.rule_set();
        for id in &self.rules.disabled {
            if !rules.set_enabled(id, false) {
                return Err(ConfigError::Invalid(format!("rules.disabled: unknown rule `{id}`")));
            }
        }
        for line in &self.rules.extra {
            let rule = schema
                .parse_rule(line)
                .map_err(|e| ConfigError::Invalid(format!("rules.extra `{line}`: {e}")))?;
            rules = rules.with_rule(rule);
        }
        Ok(rules)
    }

    pub fn schema(&self) -> DomainSchema {
        self.environment.schema()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig {
            seed: 42,
            ..ExperimentConfig::default()
        };
        c.controller.mode = Mode::NoGating;
        c.oracle.default_error = 0.05;
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_values_and_unknown_keys() {
        assert!(matches!(
            ExperimentConfig::from_toml("episodez = 3"),
            Err(ConfigError::Parse(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[controller]\ntau = 2.0"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[rules]\nextra = [\"bad: nope(?x) => clean(?x)\"]"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::from_toml("[oracle]\ndefault_error = 0.7"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn extra_rules_join_the_controller_set() {
        let c = ExperimentConfig::from_toml(
            "[rules]\nextra = [\"rule x-dirty: in(?o, ?s), ?s : sinkbasin => !clean(?o)\"]\ndisabled = [\"r04-fridge-cold\"]",
        )
        .unwrap();
        let rules = c.controller_rules().unwrap();
        assert!(rules.get("x-dirty").is_some());
        assert_eq!(rules.disabled_ids(), vec!["r04-fridge-cold".to_string()]);
    }
}
