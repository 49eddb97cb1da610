use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use uftrl::AlgorithmConfig;

/// Where the examples of a run came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetDescriptor {
    File { path: PathBuf, examples: usize, features: usize, unit_scaled: bool },
    Synthetic { n: usize, d: usize, informative: usize, noise: f64, seed: u64 },
}

/// Everything needed to rerun a command and get the same output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: Option<AlgorithmConfig>,
    pub dataset: Option<DatasetDescriptor>,
    /// Command-specific settings such as grids or check sizes.
    pub params: serde_json::Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: None,
            dataset: None,
            params: serde_json::Value::Null,
            seeds: Vec::new(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_secs: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use uftrl::{Family, LearningRateSchedule, PenaltySchedule};

    use super::*;

    #[test]
    fn round_trips_through_json() {
        let mut manifest = RunManifest::new("sweep");
        manifest.config = Some(
            AlgorithmConfig::new(Family::Rda, LearningRateSchedule::adaptive(0.7))
                .with_penalty(PenaltySchedule::l1(2.5e-6))
                .with_sigma_floor(20.0)
                .implicit(),
        );
        manifest.dataset = Some(DatasetDescriptor::Synthetic { n: 100, d: 50, informative: 3, noise: 0.1, seed: 9 });
        manifest.params = serde_json::json!({ "lambdas": [1e-6, 5e-6] });
        manifest.seeds = vec![0, 1, 2];
        manifest.wall_time_secs = 1.25;
        let text = serde_json::to_string_pretty(&manifest).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, manifest);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
    }
}
