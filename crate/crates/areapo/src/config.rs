//! Layered run configuration: built-in defaults, overridden by an optional
//! TOML file, overridden in turn by command-line flags (applied by the CLI).
//! Every command writes the fully-resolved snapshot next to its outputs so a
//! run can be reproduced from its artifacts alone.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::eval::{RobustnessConfig, ScoreSpec};
use crate::learner::LearnerConfig;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub env: EnvConfig,
    pub learner: LearnerConfig,
    pub score: ScoreSpec,
    pub robustness: RobustnessConfig,
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        self.env.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.learner.validate()?;
        self.score.validate()?;
        Ok(())
    }

    /// Serializes the resolved configuration for the snapshot file.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("config did not serialize: {e}")))
    }
}

/// Defaults, optionally overlaid with a TOML file. Sections and fields the
/// file omits keep their defaults; unknown keys are errors.
pub fn load_config(path: Option<&Path>) -> Result<Config> {
    let cfg = match path {
        None => Config::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
    };
    Ok(cfg)
}
