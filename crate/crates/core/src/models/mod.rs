//! The two neural labelers, their training loop and inference.
//!
//! Both end in the same head: a sigmoid over one unit, giving the emphasis
//! probability directly, or a softmax over two units `[no-emphasis,
//! emphasis]`. The sigmoid head trains with BCE against the gold
//! probability; the softmax head trains with KL divergence against
//! `[1 − p, p]`.

mod char_word;
mod external;
mod train;
mod vocab;

pub use char_word::CharWordConfig;
pub use external::ExternalEmbConfig;
pub use train::{train, EpochLog, TrainOutcome, TrainingConfig, TrainingLog};
pub use vocab::{ExternalEmbeddings, Vocabularies, UNK, UNK_WORD};

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EmphasisScores, Slide};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};
use crate::nncore::{grad_check, Axis, CheckResult, Checkpoint, ParamStore, Tape, Tensor, Var};
use char_word::CharWordNet;
use external::ExternalEmbNet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    #[default]
    Sigmoid,
    Softmax,
}

impl Head {
    pub fn units(self) -> usize {
        match self {
            Head::Sigmoid => 1,
            Head::Softmax => 2,
        }
    }

    /// The head a loss trains against.
    pub fn for_loss(loss: LossKind) -> Self {
        match loss {
            LossKind::Bce => Head::Sigmoid,
            LossKind::Kld => Head::Softmax,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bce,
    Kld,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bce" => Ok(LossKind::Bce),
            "kld" => Ok(LossKind::Kld),
            _ => Err(Error::Validation(format!("unknown loss {s:?}, expected bce or kld"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    CharWord,
    ExternalEmb,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::CharWord => "char_word",
            Architecture::ExternalEmb => "external_emb",
        }
    }
}

/// Everything a forward pass needs for one slide.
#[derive(Clone, Copy, Debug)]
pub struct SlideInput<'a> {
    pub slide: &'a Slide,
    pub features: &'a [FeatureVector],
    pub embeddings: Option<&'a Tensor>,
}

impl SlideInput<'_> {
    pub(crate) fn feature_matrix(&self) -> Result<Tensor> {
        if self.features.len() != self.slide.len() {
            return Err(Error::Validation(format!(
                "slide {:?}: {} feature vectors for {} tokens",
                self.slide.id(),
                self.features.len(),
                self.slide.len()
            )));
        }
        let data = self.features.iter().flat_map(|f| f.0).collect();
        Tensor::matrix(self.slide.len(), FEATURE_DIM, data)
    }
}

/// A corpus with its aligned feature vectors and, optionally, external
/// embedding matrices.
#[derive(Clone, Debug)]
pub struct Dataset<'a> {
    corpus: &'a Corpus,
    features: Vec<Vec<FeatureVector>>,
    embeddings: Option<Vec<Tensor>>,
}

impl<'a> Dataset<'a> {
    pub fn new(
        corpus: &'a Corpus,
        features: Vec<Vec<FeatureVector>>,
        embeddings: Option<&ExternalEmbeddings>,
    ) -> Result<Self> {
        if features.len() != corpus.slides().len() {
            return Err(Error::Validation(format!(
                "{} feature sequences for {} slides",
                features.len(),
                corpus.slides().len()
            )));
        }
        for (s, f) in corpus.slides().iter().zip(&features) {
            if s.len() != f.len() {
                return Err(Error::Validation(format!(
                    "slide {:?}: {} feature vectors for {} tokens",
                    s.id(),
                    f.len(),
                    s.len()
                )));
            }
        }
        let embeddings = embeddings
            .map(|e| corpus.slides().iter().map(|s| e.matrix_for(s)).collect::<Result<Vec<_>>>())
            .transpose()?;
        Ok(Dataset {
            corpus,
            features,
            embeddings,
        })
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.embeddings.as_ref().and_then(|e| e.first()).map(|t| t.data().len() / t.shape()[0])
    }

    pub fn input(&self, i: usize) -> SlideInput<'_> {
        SlideInput {
            slide: &self.corpus.slides()[i],
            features: &self.features[i],
            embeddings: self.embeddings.as_ref().map(|e| &e[i]),
        }
    }

    /// The same slides with every feature vector set to zero.
    pub fn with_zero_features(&self) -> Dataset<'a> {
        Dataset {
            corpus: self.corpus,
            features: self
                .features
                .iter()
                .map(|f| vec![FeatureVector([0.0; FEATURE_DIM]); f.len()])
                .collect(),
            embeddings: self.embeddings.clone(),
        }
    }
}

/// Per-token head outputs: `T × 1` probabilities for the sigmoid head,
/// `T × 2` distributions for the softmax head.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutput {
    pub head: Head,
    pub probs: Tensor,
}

impl HeadOutput {
    pub fn len(&self) -> usize {
        self.probs.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Emphasis probability per token.
    pub fn emphasis_scores(&self) -> Vec<f64> {
        let col = self.head.units() - 1;
        (0..self.len()).map(|t| self.probs.get(t, col)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Net {
    CharWord {
        config: CharWordConfig,
        vocab: Vocabularies,
        net: CharWordNet,
    },
    ExternalEmb {
        config: ExternalEmbConfig,
        source_id: String,
        net: ExternalEmbNet,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    net: Net,
    store: ParamStore,
    seed: u64,
    log: TrainingLog,
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Untrained CharWord labeler. `cfg` must carry the table sizes of `vocab`
/// (see [`CharWordConfig::with_vocab`]).
pub fn build_char_word_model(cfg: &CharWordConfig, vocab: Vocabularies, seed: u64) -> Result<TrainedModel> {
    if cfg.char_vocab_size != vocab.char_count() || cfg.word_vocab_size != vocab.word_count() {
        return Err(Error::Validation(format!(
            "config vocab sizes (chars {}, words {}) differ from the vocabularies (chars {}, words {})",
            cfg.char_vocab_size,
            cfg.word_vocab_size,
            vocab.char_count(),
            vocab.word_count()
        )));
    }
    let mut store = ParamStore::new();
    let net = CharWordNet::build(cfg, &mut store, &mut init_rng(seed))?;
    Ok(TrainedModel {
        net: Net::CharWord {
            config: cfg.clone(),
            vocab,
            net,
        },
        store,
        seed,
        log: TrainingLog::default(),
    })
}

/// Untrained labeler over the vectors of `source`.
pub fn build_external_emb_model(cfg: &ExternalEmbConfig, source: &ExternalEmbeddings, seed: u64) -> Result<TrainedModel> {
    if cfg.embedding_dim != source.dim() {
        return Err(Error::Validation(format!(
            "config embedding_dim={} but embedding source {:?} has dim={}",
            cfg.embedding_dim,
            source.source_id(),
            source.dim()
        )));
    }
    external_model(cfg, source.source_id().to_string(), seed)
}

fn external_model(cfg: &ExternalEmbConfig, source_id: String, seed: u64) -> Result<TrainedModel> {
    let mut store = ParamStore::new();
    let net = ExternalEmbNet::build(cfg, &mut store, &mut init_rng(seed))?;
    Ok(TrainedModel {
        net: Net::ExternalEmb {
            config: cfg.clone(),
            source_id,
            net,
        },
        store,
        seed,
        log: TrainingLog::default(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vocab: Option<Vocabularies>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding_source: Option<String>,
    training_log: TrainingLog,
}

impl TrainedModel {
    pub fn architecture(&self) -> Architecture {
        match self.net {
            Net::CharWord { .. } => Architecture::CharWord,
            Net::ExternalEmb { .. } => Architecture::ExternalEmb,
        }
    }

    pub fn head(&self) -> Head {
        match &self.net {
            Net::CharWord { net, .. } => net.head(),
            Net::ExternalEmb { net, .. } => net.head(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub(crate) fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub(crate) fn log_mut(&mut self) -> &mut TrainingLog {
        &mut self.log
    }

    pub fn char_word_config(&self) -> Option<&CharWordConfig> {
        match &self.net {
            Net::CharWord { config, .. } => Some(config),
            Net::ExternalEmb { .. } => None,
        }
    }

    pub fn external_config(&self) -> Option<&ExternalEmbConfig> {
        match &self.net {
            Net::ExternalEmb { config, .. } => Some(config),
            Net::CharWord { .. } => None,
        }
    }

    pub fn vocab(&self) -> Option<&Vocabularies> {
        match &self.net {
            Net::CharWord { vocab, .. } => Some(vocab),
            Net::ExternalEmb { .. } => None,
        }
    }

    pub fn embedding_source(&self) -> Option<&str> {
        match &self.net {
            Net::ExternalEmb { source_id, .. } => Some(source_id),
            Net::CharWord { .. } => None,
        }
    }

    /// Checks that `data` supplies what this architecture consumes.
    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if let Net::ExternalEmb { config, .. } = &self.net {
            match data.embedding_dim() {
                None if data.is_empty() => {}
                None => {
                    return Err(Error::Precondition(
                        "this model needs an external embedding file".into(),
                    ))
                }
                Some(d) if d != config.embedding_dim => {
                    return Err(Error::Validation(format!(
                        "model expects embedding_dim={}, embedding file has dim={d}",
                        config.embedding_dim
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Output-layer logits built on `tape` from the parameters in `store`,
    /// which must have this model's layout.
    pub fn logits_on<R: Rng>(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        input: &SlideInput,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        match &self.net {
            Net::CharWord { vocab, net, .. } => net.logits(vocab, tape, store, input, train, rng),
            Net::ExternalEmb { net, .. } => net.logits(tape, store, input, train, rng),
        }
    }

    /// Head probabilities on `tape`: sigmoid of the logits or a per-token
    /// softmax over the two units.
    pub fn probs_on<R: Rng>(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        input: &SlideInput,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let z = self.logits_on(store, tape, input, train, rng)?;
        self.activate(tape, z)
    }

    pub(crate) fn activate(&self, tape: &mut Tape, logits: Var) -> Result<Var> {
        match self.head() {
            Head::Sigmoid => Ok(tape.sigmoid(logits)),
            Head::Softmax => tape.softmax(logits, Axis::Cols),
        }
    }

    /// Per-token head outputs. With `train = false` dropout is off and `rng`
    /// is never drawn from.
    pub fn forward<R: Rng>(&self, input: &SlideInput, train: bool, rng: &mut R) -> Result<HeadOutput> {
        let mut tape = Tape::new();
        let p = self.probs_on(&self.store, &mut tape, input, train, rng)?;
        Ok(HeadOutput {
            head: self.head(),
            probs: tape.value(p).clone(),
        })
    }

    /// Emphasis scores for every slide of `data`, dropout off.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<EmphasisScores>> {
        self.check_dataset(data)?;
        let mut rng = init_rng(0);
        (0..data.len())
            .map(|i| {
                let input = data.input(i);
                let out = self.forward(&input, false, &mut rng)?;
                let scores = out.emphasis_scores().into_iter().map(|s| s.clamp(0.0, 1.0)).collect();
                EmphasisScores::new(input.slide.id(), scores)
            })
            .collect()
    }

    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let (config, meta) = match &self.net {
            Net::CharWord { config, vocab, .. } => (
                serde_json::to_value(config)?,
                CheckpointMeta {
                    vocab: Some(vocab.clone()),
                    embedding_source: None,
                    training_log: self.log.clone(),
                },
            ),
            Net::ExternalEmb { config, source_id, .. } => (
                serde_json::to_value(config)?,
                CheckpointMeta {
                    vocab: None,
                    embedding_source: Some(source_id.clone()),
                    training_log: self.log.clone(),
                },
            ),
        };
        Ok(Checkpoint::from_store(
            self.architecture().as_str(),
            self.seed,
            config,
            serde_json::to_value(meta)?,
            &self.store,
        ))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(ck.metadata.clone())?;
        let mut model = match ck.architecture.as_str() {
            "char_word" => {
                let cfg: CharWordConfig = serde_json::from_value(ck.config.clone())?;
                let vocab = meta
                    .vocab
                    .ok_or_else(|| Error::Validation("char_word checkpoint without vocabularies".into()))?;
                build_char_word_model(&cfg, vocab, ck.seed)?
            }
            "external_emb" => {
                let cfg: ExternalEmbConfig = serde_json::from_value(ck.config.clone())?;
                let source = meta.embedding_source.ok_or_else(|| {
                    Error::Validation("external_emb checkpoint without an embedding source".into())
                })?;
                external_model(&cfg, source, ck.seed)?
            }
            other => {
                return Err(Error::Validation(format!(
                    "unknown architecture {other:?}, expected char_word or external_emb"
                )))
            }
        };
        model.store.load_values(&ck.tensors()?)?;
        model.log = meta.training_log;
        Ok(model)
    }
}

/// Loss of `model` on one slide, built on `tape` from `store`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn slide_loss<R: Rng>(
    model: &TrainedModel,
    store: &ParamStore,
    tape: &mut Tape,
    input: &SlideInput,
    gold: &[f64],
    loss: LossKind,
    train: bool,
    rng: &mut R,
) -> Result<Var> {
    check_loss_head(loss, model.head())?;
    let p = model.probs_on(store, tape, input, train, rng)?;
    match loss {
        LossKind::Bce => tape.bce_loss(p, gold),
        LossKind::Kld => {
            let target = Tensor::from_rows(&gold.iter().map(|&g| [1.0 - g, g]).collect::<Vec<_>>())?;
            tape.kld_loss(p, &target)
        }
    }
}

pub(crate) fn check_loss_head(loss: LossKind, head: Head) -> Result<()> {
    if Head::for_loss(loss) != head {
        return Err(Error::Validation(format!(
            "loss {loss:?} trains the {:?} head, model has the {head:?} head",
            Head::for_loss(loss)
        )));
    }
    Ok(())
}

/// A CharWord configuration small enough for finite differences.
pub fn tiny_char_word_config(head: Head) -> CharWordConfig {
    CharWordConfig {
        char_embedding_dim: 3,
        char_hidden: 3,
        highway_layers: 1,
        word_embedding_dim: 4,
        word_bilstm_hidden: 4,
        dense_hidden: 5,
        dropout_rate: 0.3,
        head,
        ..CharWordConfig::default()
    }
}

/// End-to-end finite-difference checks of both labelers under both losses,
/// with randomized parameters and a 4-token slide.
pub fn model_grad_checks(seed: u64) -> Result<Vec<CheckResult>> {
    use crate::corpus::{AnnotationSet, BioTag};
    use crate::features::slide_feature_vectors;

    let mut rng = init_rng(seed);
    let words = ["Cells", "(DNA)", "x86", "•"];
    let ann: Vec<AnnotationSet> = (0..words.len())
        .map(|_| {
            let tags = (0..8)
                .map(|_| match rng.gen_range(0..3) {
                    0 => BioTag::B,
                    1 => BioTag::I,
                    _ => BioTag::O,
                })
                .collect();
            AnnotationSet::new(tags)
        })
        .collect::<Result<_>>()?;
    let slide = Slide::from_sentences("g", &[words[..2].to_vec(), words[2..].to_vec()], Some(ann))?;
    let gold = crate::corpus::gold_scores(&slide)?;
    let features = slide_feature_vectors(&slide, None)?;

    let mut emb = ExternalEmbeddings::new("gradcheck", 3)?;
    for t in 0..slide.len() {
        emb.insert("g", t, (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    }
    let emb_matrix = emb.matrix_for(&slide)?;

    let mut out = Vec::new();
    for (loss, name) in [(LossKind::Bce, "bce"), (LossKind::Kld, "kld")] {
        let head = Head::for_loss(loss);
        // the last word and its bullet character stay out of the
        // vocabulary so the UNK rows are exercised
        let vocab = Vocabularies::from_lists(
            words[..3].iter().map(|w| w.to_string()).collect(),
            "CelsDNA()x86".chars().collect(),
        );
        let cfg = tiny_char_word_config(head).with_vocab(&vocab);
        let cw = build_char_word_model(&cfg, vocab, seed)?;
        let ext_cfg = ExternalEmbConfig {
            bilstm_hidden: 3,
            bilstm_layers: 2,
            dense_layers: 2,
            dense_hidden: 4,
            head,
            ..ExternalEmbConfig::new(3)
        };
        let ext = build_external_emb_model(&ext_cfg, &emb, seed)?;
        for (model, label) in [(cw, "char_word"), (ext, "external_emb")] {
            let mut store = model.store.clone();
            // biases start at zero; perturb everything so no unit sits at a kink
            for p in store.params_mut() {
                for v in p.tensor.data_mut() {
                    *v += rng.gen_range(-0.3..0.3);
                }
            }
            let input = SlideInput {
                slide: &slide,
                features: &features,
                embeddings: Some(&emb_matrix),
            };
            let mut dummy = init_rng(0);
            let err = grad_check(&mut store, 1e-6, |tape, s| {
                slide_loss(&model, s, tape, &input, gold.scores(), loss, false, &mut dummy)
            })?;
            out.push(CheckResult {
                name: format!("{label}_{name}"),
                max_rel_error: err,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
