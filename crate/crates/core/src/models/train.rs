use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_loss_head, slide_loss, Dataset, LossKind, TrainedModel};
use crate::corpus::gold_scores;
use crate::error::{Error, Result};
use crate::eval::{average_match, MatchConfig};
use crate::nncore::{adam_step, AdamState, Tape};

/// Stream offset separating dropout draws from the shuffle order.
const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

fn default_epochs() -> usize {
    100
}
fn default_shuffle() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    pub loss: LossKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
    /// m values used to score the dev corpus after each epoch.
    #[serde(default)]
    pub dev_match: MatchConfig,
}

impl TrainingConfig {
    pub const CHAR_WORD_LEARNING_RATE: f64 = 1e-4;
    pub const EXTERNAL_EMB_LEARNING_RATE: f64 = 2e-5;

    pub fn new(loss: LossKind, learning_rate: f64, seed: u64) -> Self {
        TrainingConfig {
            learning_rate,
            epochs: default_epochs(),
            loss,
            seed,
            shuffle: true,
            dev_match: MatchConfig::slide_level(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Validation(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be at least 1".into()));
        }
        self.dev_match.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-token loss over the epoch.
    pub mean_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_average_match: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

impl TrainingLog {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_loss).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub final_model: TrainedModel,
    /// Parameters from the epoch with the highest dev average Match; the
    /// earliest such epoch wins ties. Present only when a dev set was given.
    pub best_model: Option<TrainedModel>,
}

/// Trains with one Adam step per slide for `tcfg.epochs` passes.
///
/// Shuffling and dropout draw from separate seeded streams, so a fixed
/// seed and slide order reproduce the run bit for bit.
pub fn train(
    mut model: TrainedModel,
    data: &Dataset,
    dev: Option<&Dataset>,
    tcfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    tcfg.validate()?;
    check_loss_head(tcfg.loss, model.head())?;
    if data.is_empty() {
        return Err(Error::Precondition("training corpus has no slides".into()));
    }
    if !data.corpus().is_annotated() {
        return Err(Error::Precondition("training corpus is not annotated".into()));
    }
    model.check_dataset(data)?;
    let dev_gold = match dev {
        Some(d) => {
            model.check_dataset(d)?;
            Some(d.corpus().gold()?)
        }
        None => None,
    };
    let gold: Vec<Vec<f64>> = data
        .corpus()
        .slides()
        .iter()
        .map(|s| gold_scores(s).map(|g| g.scores().to_vec()))
        .collect::<Result<_>>()?;
    let token_total: usize = gold.iter().map(Vec::len).sum();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ DROPOUT_STREAM);
    let mut adam = AdamState::new(model.params(), tcfg.learning_rate);
    model.log_mut().epochs.clear();
    model.log_mut().best_epoch = None;
    let mut best: Option<(f64, TrainedModel)> = None;

    for epoch in 1..=tcfg.epochs {
        if tcfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0;
        for &i in &order {
            let input = data.input(i);
            let mut tape = Tape::new();
            let loss = slide_loss(
                &model,
                model.params(),
                &mut tape,
                &input,
                &gold[i],
                tcfg.loss,
                true,
                &mut dropout_rng,
            )?;
            let value = tape.scalar(loss);
            if !value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    slide_id: input.slide.id().to_string(),
                });
            }
            loss_sum += value * gold[i].len() as f64;
            let grads = tape.backward(loss)?;
            let store = model.params_mut();
            store.zero_grad();
            grads.accumulate_into(&tape, store);
            adam_step(store, &mut adam)?;
        }
        let dev_average_match = match (dev, &dev_gold) {
            (Some(d), Some(g)) => Some(average_match(g, &model.predict(d)?, &tcfg.dev_match)?.average),
            _ => None,
        };
        model.log_mut().epochs.push(EpochLog {
            epoch,
            mean_loss: loss_sum / token_total as f64,
            dev_average_match,
        });
        if let Some(score) = dev_average_match {
            if best.as_ref().map_or(true, |(b, _)| score > *b) {
                model.log_mut().best_epoch = Some(epoch);
                best = Some((score, model.clone()));
            }
        }
    }
    model.params_mut().zero_grad();
    let best_model = best.map(|(_, mut m)| {
        // the snapshot carries the log up to its own epoch; give it the full one
        *m.log_mut() = model.log().clone();
        m.params_mut().zero_grad();
        m
    });
    Ok(TrainOutcome {
        final_model: model,
        best_model,
    })
}
