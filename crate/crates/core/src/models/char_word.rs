//! Word embedding plus character BiLSTM encoder, followed by a word-level
//! BiLSTM, self-attention, token features and a small dense head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vocab::{Vocabularies, UNK};
use super::{Head, SlideInput};
use crate::error::{Error, Result};
use crate::features::FEATURE_DIM;
use crate::nncore::{
    bilstm, highway, lstm_cell, self_attention, Axis, BiLstm, Highway, Linear, LstmParams, ParamId, ParamStore,
    SelfAttention, Tape, Tensor, Var,
};

fn default_char_embedding_dim() -> usize {
    50
}
fn default_char_hidden() -> usize {
    300
}
fn default_highway_layers() -> usize {
    1
}
fn default_word_embedding_dim() -> usize {
    128
}
fn default_word_bilstm_hidden() -> usize {
    512
}
pub(super) fn default_dense_hidden() -> usize {
    20
}
pub(super) fn default_dropout() -> f64 {
    0.3
}
fn default_feature_dim() -> usize {
    FEATURE_DIM
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharWordConfig {
    /// Table sizes including the UNK row; filled from the vocabularies.
    #[serde(default)]
    pub char_vocab_size: usize,
    #[serde(default)]
    pub word_vocab_size: usize,
    #[serde(default = "default_char_embedding_dim")]
    pub char_embedding_dim: usize,
    /// Per direction.
    #[serde(default = "default_char_hidden")]
    pub char_hidden: usize,
    #[serde(default = "default_highway_layers")]
    pub highway_layers: usize,
    #[serde(default = "default_word_embedding_dim")]
    pub word_embedding_dim: usize,
    /// Per direction.
    #[serde(default = "default_word_bilstm_hidden")]
    pub word_bilstm_hidden: usize,
    #[serde(default = "default_dense_hidden")]
    pub dense_hidden: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default)]
    pub head: Head,
}

impl Default for CharWordConfig {
    fn default() -> Self {
        CharWordConfig {
            char_vocab_size: 0,
            word_vocab_size: 0,
            char_embedding_dim: default_char_embedding_dim(),
            char_hidden: default_char_hidden(),
            highway_layers: default_highway_layers(),
            word_embedding_dim: default_word_embedding_dim(),
            word_bilstm_hidden: default_word_bilstm_hidden(),
            dense_hidden: default_dense_hidden(),
            dropout_rate: default_dropout(),
            feature_dim: FEATURE_DIM,
            head: Head::Sigmoid,
        }
    }
}

impl CharWordConfig {
    /// Copies the table sizes of `vocab` into the config.
    pub fn with_vocab(mut self, vocab: &Vocabularies) -> Self {
        self.char_vocab_size = vocab.char_count();
        self.word_vocab_size = vocab.word_count();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("char_vocab_size", self.char_vocab_size),
            ("word_vocab_size", self.word_vocab_size),
            ("char_embedding_dim", self.char_embedding_dim),
            ("char_hidden", self.char_hidden),
            ("word_embedding_dim", self.word_embedding_dim),
            ("word_bilstm_hidden", self.word_bilstm_hidden),
            ("dense_hidden", self.dense_hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("{name} must be positive")));
        }
        if self.feature_dim != FEATURE_DIM {
            return Err(Error::Validation(format!(
                "feature_dim must be {FEATURE_DIM}, got {}",
                self.feature_dim
            )));
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
pub(super) struct CharWordNet {
    word_embedding: ParamId,
    char_embedding: ParamId,
    char_forward: LstmParams,
    char_backward: LstmParams,
    highways: Vec<Highway>,
    word_bilstm: BiLstm,
    attention: SelfAttention,
    dense: Linear,
    output: Linear,
    dropout_rate: f64,
    head: Head,
}

impl CharWordNet {
    pub(super) fn build<R: Rng>(cfg: &CharWordConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let word_embedding = store.add_xavier("word_embedding", cfg.word_vocab_size, cfg.word_embedding_dim, rng)?;
        let char_embedding = store.add_xavier("char_embedding", cfg.char_vocab_size, cfg.char_embedding_dim, rng)?;
        let char_forward = LstmParams::new(store, "char_lstm.fwd", cfg.char_embedding_dim, cfg.char_hidden, rng)?;
        let char_backward = LstmParams::new(store, "char_lstm.bwd", cfg.char_embedding_dim, cfg.char_hidden, rng)?;
        let char_dim = 2 * cfg.char_hidden;
        let highways = (0..cfg.highway_layers)
            .map(|k| Highway::new(store, &format!("highway.{k}"), char_dim, rng))
            .collect::<Result<_>>()?;
        let word_bilstm = BiLstm::new(
            store,
            "word_bilstm",
            cfg.word_embedding_dim + char_dim,
            cfg.word_bilstm_hidden,
            rng,
        )?;
        let attn_dim = 2 * cfg.word_bilstm_hidden;
        let attention = SelfAttention::new(store, "attention", attn_dim, rng)?;
        let dense = Linear::new(store, "dense", attn_dim + cfg.feature_dim, cfg.dense_hidden, rng)?;
        let output = Linear::new(store, "output", cfg.dense_hidden, cfg.head.units(), rng)?;
        Ok(CharWordNet {
            word_embedding,
            char_embedding,
            char_forward,
            char_backward,
            highways,
            word_bilstm,
            attention,
            dense,
            output,
            dropout_rate: cfg.dropout_rate,
            head: cfg.head,
        })
    }

    /// Final character-BiLSTM state of every word, `T × 2·char_hidden`.
    ///
    /// All words of the slide run through the forward direction together,
    /// one character position per step; words that have already ended keep
    /// their state through a 0/1 mask. The backward direction's output at
    /// the last character is a single step from the zero state.
    fn encode_chars(&self, tape: &mut Tape, store: &ParamStore, char_ids: &[Vec<usize>]) -> Result<Var> {
        let n = char_ids.len();
        let hidden = self.char_forward.hidden;
        let table = tape.param(store, self.char_embedding);
        let max_len = char_ids.iter().map(Vec::len).max().unwrap_or(0);
        let mut h = tape.leaf(Tensor::zeros(n, hidden));
        let mut c = tape.leaf(Tensor::zeros(n, hidden));
        for step in 0..max_len {
            let ids: Vec<usize> = char_ids.iter().map(|w| w.get(step).copied().unwrap_or(UNK)).collect();
            let x = tape.embedding_lookup(table, &ids)?;
            let (h_new, c_new) = lstm_cell(tape, store, x, h, c, &self.char_forward)?;
            if char_ids.iter().all(|w| w.len() > step) {
                h = h_new;
                c = c_new;
            } else {
                let mut mask = Vec::with_capacity(n * hidden);
                for w in char_ids {
                    let live = if w.len() > step { 1.0 } else { 0.0 };
                    mask.extend(std::iter::repeat(live).take(hidden));
                }
                let mask = tape.leaf(Tensor::matrix(n, hidden, mask)?);
                // state += mask ⊙ (new − state)
                for (state, new) in [(&mut h, h_new), (&mut c, c_new)] {
                    let delta = tape.sub(new, *state)?;
                    let delta = tape.mul(mask, delta)?;
                    *state = tape.add(*state, delta)?;
                }
            }
        }
        let last: Vec<usize> = char_ids.iter().map(|w| *w.last().unwrap_or(&UNK)).collect();
        let x = tape.embedding_lookup(table, &last)?;
        let zero = tape.leaf(Tensor::zeros(n, self.char_backward.hidden));
        let (h_back, _) = lstm_cell(tape, store, x, zero, zero, &self.char_backward)?;
        tape.concat(&[h, h_back], Axis::Cols)
    }

    /// Output-layer logits, `T × units`.
    pub(super) fn logits<R: Rng>(
        &self,
        vocab: &Vocabularies,
        tape: &mut Tape,
        store: &ParamStore,
        input: &SlideInput,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let surfaces: Vec<&str> = input.slide.surfaces().collect();
        let word_ids: Vec<usize> = surfaces.iter().map(|w| vocab.word_id(w)).collect();
        let char_ids: Vec<Vec<usize>> = surfaces.iter().map(|w| vocab.char_ids(w)).collect();

        let table = tape.param(store, self.word_embedding);
        let words = tape.embedding_lookup(table, &word_ids)?;
        let mut chars = self.encode_chars(tape, store, &char_ids)?;
        for hw in &self.highways {
            chars = highway(tape, store, chars, hw)?;
        }
        let e = tape.concat(&[words, chars], Axis::Cols)?;
        let e = tape.dropout(e, self.dropout_rate, train, rng)?;
        let h = bilstm(tape, store, e, &self.word_bilstm)?;
        let (a, _) = self_attention(tape, store, h, &self.attention)?;
        let feats = tape.leaf(input.feature_matrix()?);
        let z = tape.concat(&[a, feats], Axis::Cols)?;
        let d = self.dense.forward(tape, store, z)?;
        let d = tape.relu(d);
        let d = tape.dropout(d, self.dropout_rate, train, rng)?;
        self.output.forward(tape, store, d)
    }

    pub(super) fn head(&self) -> Head {
        self.head
    }
}
