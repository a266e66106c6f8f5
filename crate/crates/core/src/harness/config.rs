use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{ConditionKind, EngineConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::human::HumanProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { learning_rate: 0.5, iterations: 400 }
    }
}

/// Top-level experiment file. Every field is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub engine: EngineConfig,
    pub conditions: Vec<ConditionKind>,
    /// Participants per condition.
    pub participants: u32,
    /// Profile names, assigned to participants round-robin.
    pub population: Vec<String>,
    /// Extra or overriding profile definitions, looked up before the built-in library.
    pub profiles: Vec<HumanProfile>,
    pub seed: u64,
    pub folds: usize,
    pub logistic: LogisticConfig,
    pub bootstrap_resamples: usize,
    pub write_logs: bool,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            engine: EngineConfig::default(),
            conditions: ConditionKind::ALL.to_vec(),
            participants: 40,
            population: vec!["time_blind_myopic".into()],
            profiles: Vec::new(),
            seed: 0,
            folds: 10,
            logistic: LogisticConfig::default(),
            bootstrap_resamples: 2000,
            write_logs: true,
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Known profiles: the configured ones shadow the library.
    pub fn profile_library(&self) -> Vec<HumanProfile> {
        let mut all = self.profiles.clone();
        for p in HumanProfile::library() {
            if !all.iter().any(|q| q.name == p.name) {
                all.push(p);
            }
        }
        all
    }

    pub fn resolve_population(&self) -> Result<Vec<HumanProfile>> {
        let library = self.profile_library();
        self.population.iter().map(|name| HumanProfile::find(&library, name).cloned()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        if self.conditions.is_empty() {
            return Err(Error::config("no conditions listed"));
        }
        if self.population.is_empty() {
            return Err(Error::config("population is empty"));
        }
        for p in &self.profiles {
            p.validate()?;
        }
        self.resolve_population()?;
        if self.folds < 2 {
            return Err(Error::config("folds must be at least 2"));
        }
        if !(self.logistic.learning_rate > 0.0 && self.logistic.learning_rate.is_finite()) {
            return Err(Error::config("logistic.learning_rate must be positive"));
        }
        Ok(())
    }
}
