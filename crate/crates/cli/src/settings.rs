use std::path::Path;

use serde::{Deserialize, Serialize};
use susing_core::corpus::CorpusConfig;
use susing_core::model::ModelConfig;
use susing_core::train::TrainConfig;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSettings {
    pub gl_iters: usize,
    /// Seeds the Griffin-Lim starting phase.
    pub seed: u64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            gl_iters: 60,
            seed: 0,
        }
    }
}

/// Every tunable, as read from a TOML config file. Sections and keys
/// mirror the library configuration structs; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub synth: SynthSettings,
}

impl Settings {
    /// Defaults, overridden by `path` when given.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable settings: {e}>"))
    }
}
