use std::path::Path;

use anyhow::Context;
use idbastar::planner::PlannerConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub planner: PlannerConfig,
    pub generator: GeneratorSettings,
    pub bench: BenchSettings,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub count: usize,
    pub seed: u64,
    /// Seconds.
    pub time_budget: Option<f64>,
    pub workers: Option<usize>,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            count: 1000,
            seed: 0,
            time_budget: None,
            workers: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSettings {
    pub trials: usize,
    pub budget: f64,
    pub seed: u64,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            trials: 10,
            budget: 120.0,
            seed: 0,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_yaml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
