use std::path::Path;

use anyhow::Context;
use leafnet_core::augment::AugmentPlan;
use leafnet_core::baselines::ClassifierOptions;
use leafnet_core::cnn::NetworkOptions;
use leafnet_core::experiment::{FitThresholds, SplitSpec, TrainConfig};
use leafnet_core::imaging::SegmentConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub classes: usize,
    pub per_class: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { classes: 7, per_class: 120 }
    }
}

/// Everything a command may need, read from one JSON document. Missing
/// sections take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub segment: SegmentConfig,
    pub augment: AugmentPlan,
    pub split: SplitSpec,
    pub network: NetworkOptions,
    pub train: TrainConfig,
    pub thresholds: FitThresholds,
    pub classifiers: ClassifierOptions,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Push the top-level seed into every seeded section.
    pub fn propagate_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.split.seed = seed;
        self.train.seed = seed;
        self.classifiers.cnn.seed = seed;
        self.classifiers.svm_seed = seed;
        self.classifiers.bp.seed = seed;
    }
}
