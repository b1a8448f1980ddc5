use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineParams;
use crate::captioner::CaptionerConfig;
use crate::encoder::HeadTrainConfig;
use crate::error::{Error, Result};
use crate::scenescape::{HdbscanConfig, TsneConfig};
use crate::seed::{sub_seed, Stream};
use crate::topics::LdaConfig;

/// Where clustering runs: on the 2-D t-SNE layout or on the raw sentence
/// embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClusterSpace {
    #[default]
    Tsne,
    Raw,
}

/// Every tunable of a run. Loaded from `--config`, then overridden by
/// command-line flags. Module seeds are derived from `seed` and any seed
/// written inside a module section is replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Every run is reproducible from its seed; `false` is rejected.
    pub deterministic: bool,
    /// Worker threads for the parallel parts; `None` lets the pool decide.
    pub threads: Option<usize>,
    pub test_fraction: f64,
    pub encoder: HeadTrainConfig,
    pub captioner: CaptionerConfig,
    pub baselines: BaselineParams,
    pub lda: LdaConfig,
    pub topic_words: usize,
    pub topic_min_freq: usize,
    pub tsne: TsneConfig,
    pub hdbscan: HdbscanConfig,
    pub cluster_space: ClusterSpace,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            deterministic: true,
            threads: None,
            test_fraction: 0.1,
            encoder: HeadTrainConfig::default(),
            captioner: CaptionerConfig::default(),
            baselines: BaselineParams::default(),
            lda: LdaConfig::default(),
            topic_words: 5,
            topic_min_freq: 1,
            tsne: TsneConfig::default(),
            hdbscan: HdbscanConfig::default(),
            cluster_space: ClusterSpace::Tsne,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn split_seed(&self) -> u64 {
        sub_seed(self.seed, Stream::Split)
    }

    /// Push the global seed down into every module section.
    pub fn fan_out_seeds(&mut self) {
        self.encoder.seed = sub_seed(self.seed, Stream::Encoder);
        self.captioner.seed = sub_seed(self.seed, Stream::Captioner);
        self.baselines.forest.seed = sub_seed(self.seed, Stream::Forest);
        self.lda.seed = sub_seed(self.seed, Stream::Topics);
        self.tsne.seed = sub_seed(self.seed, Stream::Tsne);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Usage(format!("test_fraction {} must lie in (0, 1)", self.test_fraction)));
        }
        if !self.deterministic {
            return Err(Error::Usage("non-deterministic runs are not supported".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Usage("threads must be at least 1".into()));
        }
        if self.topic_words == 0 {
            return Err(Error::Usage("topic_words must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "lda": {"topics": 4}, "encoder": {"epochs": 3}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.lda.topics, 4);
        assert_eq!(c.lda.beta, 0.01);
        assert_eq!(c.encoder.epochs, 3);
        assert_eq!(c.encoder.batch_size, 32);
        assert_eq!(c.test_fraction, 0.1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { deterministic: false, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { test_fraction: 1.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { threads: Some(0), ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { topic_words: 0, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn seeds_fan_out_independently() {
        let mut a = RunConfig { seed: 7, ..RunConfig::default() };
        a.fan_out_seeds();
        assert_eq!(a.lda.seed, 7 ^ Stream::Topics.constant());
        assert_ne!(a.encoder.seed, a.tsne.seed);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), a);
    }
}
