//! Experiment configuration file (TOML) and its digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::featnet::NetworkSpec;
use crate::nst::StyleTransferConfig;
use crate::pipeline::LeakageScope;
use crate::trainer::TrainConfig;

pub const SEED_ENV: &str = "STYLEFORGE_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { per_class: 200, height: 32, width: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatnetConfig {
    /// Real images per class reserved for feature-net and baseline training.
    pub pool_per_class: usize,
    pub train: TrainConfig,
}

impl Default for FeatnetConfig {
    fn default() -> Self {
        FeatnetConfig { pool_per_class: 40, train: TrainConfig { epochs_max: 30, ..TrainConfig::default() } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Number of (content, style) pairs to synthesise.
    pub budget: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig { budget: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PseudoLabelConfig {
    /// Balance the classes with a chosen threshold; otherwise cut at 0.5.
    pub balance: bool,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        PseudoLabelConfig { balance: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub k: usize,
    pub leakage_scope: LeakageScope,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { k: 5, leakage_scope: LeakageScope::Test }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub architectures: Vec<String>,
    pub with_da: TrainConfig,
    pub without_da: TrainConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            architectures: vec!["mini-vgg-a".into()],
            with_da: TrainConfig::default(),
            without_da: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; relative paths resolve against the config file.
    pub dataset_root: PathBuf,
    pub corpus: CorpusConfig,
    pub featnet: FeatnetConfig,
    pub nst: StyleTransferConfig,
    pub synthesis: SynthesisConfig,
    pub pseudo_label: PseudoLabelConfig,
    pub split: SplitConfig,
    pub classifier: ClassifierConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            dataset_root: PathBuf::from("desk-run"),
            corpus: CorpusConfig::default(),
            featnet: FeatnetConfig::default(),
            nst: StyleTransferConfig::default(),
            synthesis: SynthesisConfig::default(),
            pseudo_label: PseudoLabelConfig::default(),
            split: SplitConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file, resolving `dataset_root` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.dataset_root.is_relative() {
            let base = path.parent().unwrap_or(Path::new(""));
            cfg.dataset_root = base.join(&cfg.dataset_root);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Replaces the seed with `STYLEFORGE_SEED` when that is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.per_class == 0 || c.height < 16 || c.width < 16 {
            return Err(Error::Config(format!(
                "corpus needs per_class ≥ 1 and images ≥ 16×16, got {} of {}×{}",
                c.per_class, c.height, c.width
            )));
        }
        let pool = self.featnet.pool_per_class;
        if pool < crate::featnet::MIN_PER_CLASS {
            return Err(Error::Config(format!(
                "featnet.pool_per_class must be at least {}, got {pool}",
                crate::featnet::MIN_PER_CLASS
            )));
        }
        if self.split.k < 2 {
            return Err(Error::Config(format!("split.k must be at least 2, got {}", self.split.k)));
        }
        if pool + self.split.k > c.per_class {
            return Err(Error::Config(format!(
                "per_class {} cannot hold a pool of {pool} plus {} folds",
                c.per_class, self.split.k
            )));
        }
        self.featnet.train.validate()?;
        self.nst.validate_for(&crate::featnet::WeightBundle::zeros(&NetworkSpec::feature_net(c.height, c.width))?)?;
        if self.synthesis.budget == 0 {
            return Err(Error::Config("synthesis.budget must be at least 1".into()));
        }
        if self.classifier.architectures.is_empty() {
            return Err(Error::Config("classifier.architectures is empty".into()));
        }
        for arch in &self.classifier.architectures {
            NetworkSpec::classifier(arch, c.height, c.width)?;
        }
        self.classifier.with_da.validate()?;
        self.classifier.without_da.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, excluding `dataset_root`.
    pub fn digest(&self) -> String {
        let mut canon = self.clone();
        canon.dataset_root = PathBuf::new();
        let json = serde_json::to_vec(&canon).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }
}
