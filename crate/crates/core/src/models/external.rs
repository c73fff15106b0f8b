//! Labeler over externally supplied per-token vectors: stacked BiLSTMs,
//! stacked dense layers and the output head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::char_word::{default_dense_hidden, default_dropout};
use super::{Head, SlideInput};
use crate::error::{Error, Result};
use crate::nncore::{bilstm, BiLstm, Linear, ParamStore, Tape, Var};

fn default_bilstm_hidden() -> usize {
    256
}
fn default_layers() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalEmbConfig {
    pub embedding_dim: usize,
    /// Per direction.
    #[serde(default = "default_bilstm_hidden")]
    pub bilstm_hidden: usize,
    #[serde(default = "default_layers")]
    pub bilstm_layers: usize,
    #[serde(default = "default_layers")]
    pub dense_layers: usize,
    #[serde(default = "default_dense_hidden")]
    pub dense_hidden: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default)]
    pub head: Head,
}

impl ExternalEmbConfig {
    pub fn new(embedding_dim: usize) -> Self {
        ExternalEmbConfig {
            embedding_dim,
            bilstm_hidden: default_bilstm_hidden(),
            bilstm_layers: default_layers(),
            dense_layers: default_layers(),
            dense_hidden: default_dense_hidden(),
            dropout_rate: default_dropout(),
            head: Head::Sigmoid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embedding_dim", self.embedding_dim),
            ("bilstm_hidden", self.bilstm_hidden),
            ("bilstm_layers", self.bilstm_layers),
            ("dense_layers", self.dense_layers),
            ("dense_hidden", self.dense_hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("{name} must be positive")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(super) struct ExternalEmbNet {
    pub(super) bilstms: Vec<BiLstm>,
    pub(super) dense: Vec<Linear>,
    output: Linear,
    embedding_dim: usize,
    dropout_rate: f64,
    head: Head,
}

impl ExternalEmbNet {
    pub(super) fn build<R: Rng>(cfg: &ExternalEmbConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut bilstms = Vec::with_capacity(cfg.bilstm_layers);
        let mut width = cfg.embedding_dim;
        for k in 0..cfg.bilstm_layers {
            let b = BiLstm::new(store, &format!("bilstm.{k}"), width, cfg.bilstm_hidden, rng)?;
            width = b.output_dim();
            bilstms.push(b);
        }
        let mut dense = Vec::with_capacity(cfg.dense_layers);
        for k in 0..cfg.dense_layers {
            dense.push(Linear::new(store, &format!("dense.{k}"), width, cfg.dense_hidden, rng)?);
            width = cfg.dense_hidden;
        }
        let output = Linear::new(store, "output", width, cfg.head.units(), rng)?;
        Ok(ExternalEmbNet {
            bilstms,
            dense,
            output,
            embedding_dim: cfg.embedding_dim,
            dropout_rate: cfg.dropout_rate,
            head: cfg.head,
        })
    }

    pub(super) fn logits<R: Rng>(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        input: &SlideInput,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let emb = input.embeddings.ok_or_else(|| {
            Error::Precondition("this model needs external embeddings for every slide".into())
        })?;
        let (t, d) = emb.dims("external_emb")?;
        if d != self.embedding_dim {
            return Err(Error::Validation(format!(
                "model expects embedding_dim={}, embeddings have dim={d}",
                self.embedding_dim
            )));
        }
        if t != input.slide.len() {
            return Err(Error::shape(
                "external_emb",
                format!("{t} vectors for {} tokens", input.slide.len()),
            ));
        }
        let mut x = tape.leaf(emb.clone());
        x = tape.dropout(x, self.dropout_rate, train, rng)?;
        for b in &self.bilstms {
            x = bilstm(tape, store, x, b)?;
        }
        for l in &self.dense {
            x = l.forward(tape, store, x)?;
            x = tape.relu(x);
        }
        x = tape.dropout(x, self.dropout_rate, train, rng)?;
        self.output.forward(tape, store, x)
    }

    pub(super) fn head(&self) -> Head {
        self.head
    }
}
