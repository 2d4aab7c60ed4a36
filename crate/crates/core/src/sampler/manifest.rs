use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Conditioning, RunOutput, SamplerConfig};
use crate::tensor::RNG_ALGORITHM;

/// JSON record written next to a run's outputs. Re-running its `config`
/// with the same backend reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SamplerConfig,
    pub seed: u64,
    pub rng: String,
    pub backend: String,
    pub conditioning: Conditioning,
    pub step_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(config: &SamplerConfig, backend: String, conditioning: &Conditioning, run: &RunOutput) -> Self {
        Self {
            config: config.clone(),
            seed: config.seed,
            rng: RNG_ALGORITHM.to_string(),
            backend,
            conditioning: conditioning.clone(),
            step_seconds: run.step_seconds.clone(),
            total_seconds: run.step_seconds.iter().sum(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn with_output(mut self, name: &str, path: impl AsRef<Path>) -> Self {
        self.outputs
            .insert(name.to_string(), path.as_ref().display().to_string());
        self
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, json)
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}
