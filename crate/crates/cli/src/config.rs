//! Run configuration: one JSON document, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use emphasis_core::corpus::CorpusFormat;
use emphasis_core::eval::MatchConfig;
use emphasis_core::models::{Architecture, CharWordConfig, ExternalEmbConfig, Head, LossKind, TrainingConfig};
use serde::{Deserialize, Serialize};

use crate::InputError;

fn default_format() -> CorpusFormat {
    CorpusFormat::Tsv
}
fn default_architecture() -> Architecture {
    Architecture::CharWord
}
fn default_loss() -> LossKind {
    LossKind::Bce
}
fn default_epochs() -> usize {
    100
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Falls back to the architecture's default rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_true")]
    pub shuffle: bool,
    /// Keep the parameters of the best dev epoch in addition to the final ones.
    #[serde(default = "default_true")]
    pub keep_best: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            loss: default_loss(),
            learning_rate: None,
            epochs: default_epochs(),
            shuffle: true,
            keep_best: true,
        }
    }
}

/// Input and output locations. Positional arguments and flags fill these in.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyphrases: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Corpus output format and report format.
    #[serde(default = "default_format")]
    pub format: CorpusFormat,
    #[serde(default = "default_architecture")]
    pub architecture: Architecture,
    #[serde(default)]
    pub char_word: CharWordConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_emb: Option<ExternalEmbConfig>,
    /// Identifier stored with external-embedding models; defaults to the
    /// embeddings file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_source: Option<String>,
    #[serde(default)]
    pub training: TrainSection,
    #[serde(default)]
    pub evaluation: MatchConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            format: default_format(),
            architecture: default_architecture(),
            char_word: CharWordConfig::default(),
            external_emb: None,
            embedding_source: None,
            training: TrainSection::default(),
            evaluation: MatchConfig::default(),
            ensemble_weights: None,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    /// Loads a config file. A head left out of the model section is derived
    /// from the loss.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let raw: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| InputError(format!("config {} is not valid JSON: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_value(raw.clone())
            .map_err(|e| InputError(format!("config {}: {e}", path.display())))?;
        let head_given = |section: &str| raw.pointer(&format!("/{section}/head")).is_some();
        if !head_given("char_word") {
            cfg.char_word.head = Head::for_loss(cfg.training.loss);
        }
        if let Some(ext) = cfg.external_emb.as_mut() {
            if !head_given("external_emb") {
                ext.head = Head::for_loss(cfg.training.loss);
            }
        }
        Ok(cfg)
    }

    /// Sets the loss and the matching head of every model section.
    pub fn set_loss(&mut self, loss: LossKind) {
        self.training.loss = loss;
        self.char_word.head = Head::for_loss(loss);
        if let Some(ext) = self.external_emb.as_mut() {
            ext.head = Head::for_loss(loss);
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.training.learning_rate.unwrap_or(match self.architecture {
            Architecture::CharWord => TrainingConfig::CHAR_WORD_LEARNING_RATE,
            Architecture::ExternalEmb => TrainingConfig::EXTERNAL_EMB_LEARNING_RATE,
        })
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.learning_rate(),
            epochs: self.training.epochs,
            loss: self.training.loss,
            seed: self.seed,
            shuffle: self.training.shuffle,
            dev_match: self.evaluation.clone(),
        }
    }

    /// The config with every default spelled out, as written next to outputs.
    pub fn resolved(&self) -> RunConfig {
        let mut r = self.clone();
        r.training.learning_rate = Some(self.learning_rate());
        r
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.resolved())?;
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }
}
