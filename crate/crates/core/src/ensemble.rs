//! Per-token weighted averaging of score sets from several models.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::EmphasisScores;
use crate::error::{Error, Result};

/// How many missing pairs an error message lists before summarizing.
const MAX_LISTED: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: Vec<String>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

impl EnsembleSpec {
    pub fn uniform(members: Vec<String>) -> Self {
        EnsembleSpec {
            members,
            weights: None,
        }
    }

    /// Weights scaled to sum to one.
    pub fn normalized_weights(&self) -> Result<Vec<f64>> {
        if self.members.is_empty() {
            return Err(Error::Validation("an ensemble needs at least one member".into()));
        }
        let w = match &self.weights {
            None => return Ok(vec![1.0 / self.members.len() as f64; self.members.len()]),
            Some(w) => w,
        };
        if w.len() != self.members.len() {
            return Err(Error::Validation(format!(
                "{} weights for {} members",
                w.len(),
                self.members.len()
            )));
        }
        if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Validation(format!("weights must be positive, got {bad}")));
        }
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|x| x / total).collect())
    }
}

fn coverage(set: &[EmphasisScores]) -> BTreeSet<(String, usize)> {
    set.iter()
        .flat_map(|s| (0..s.len()).map(move |i| (s.slide_id().to_string(), i)))
        .collect()
}

fn describe(pairs: &[&(String, usize)]) -> String {
    let mut listed: Vec<String> = pairs
        .iter()
        .take(MAX_LISTED)
        .map(|(id, i)| format!("({id}, {i})"))
        .collect();
    if pairs.len() > MAX_LISTED {
        listed.push(format!("... {} more", pairs.len() - MAX_LISTED));
    }
    listed.join(", ")
}

/// Weighted arithmetic mean of member scores, token by token.
///
/// The first member fixes the slide order of the output; the others may list
/// slides in any order but must cover exactly the same `(slide_id,
/// token_index)` pairs.
pub fn ensemble_scores(score_sets: &[Vec<EmphasisScores>], spec: &EnsembleSpec) -> Result<Vec<EmphasisScores>> {
    let weights = spec.normalized_weights()?;
    if score_sets.len() != weights.len() {
        return Err(Error::Validation(format!(
            "{} score sets for {} ensemble members",
            score_sets.len(),
            weights.len()
        )));
    }
    let reference = coverage(&score_sets[0]);
    let mut lookups = Vec::with_capacity(score_sets.len());
    for (k, set) in score_sets.iter().enumerate() {
        let cov = coverage(set);
        if cov != reference {
            let missing: Vec<_> = reference.difference(&cov).collect();
            let extra: Vec<_> = cov.difference(&reference).collect();
            let mut msg = format!("member {:?} does not cover the same tokens", spec.members[k]);
            if !missing.is_empty() {
                msg.push_str(&format!("; missing: {}", describe(&missing)));
            }
            if !extra.is_empty() {
                msg.push_str(&format!("; not in first member: {}", describe(&extra)));
            }
            return Err(Error::Validation(msg));
        }
        let by_id: HashMap<&str, &EmphasisScores> = set.iter().map(|s| (s.slide_id(), s)).collect();
        if by_id.len() != set.len() {
            return Err(Error::Validation(format!(
                "member {:?} repeats a slide id",
                spec.members[k]
            )));
        }
        lookups.push(by_id);
    }
    score_sets[0]
        .iter()
        .map(|first| {
            let id = first.slide_id();
            let mut acc = vec![0.0; first.len()];
            for (by_id, &w) in lookups.iter().zip(&weights) {
                for (a, s) in acc.iter_mut().zip(by_id[id].scores()) {
                    *a += w * s;
                }
            }
            // rounding can push a mean of ones a hair past 1
            for a in &mut acc {
                *a = a.clamp(0.0, 1.0);
            }
            EmphasisScores::new(id, acc)
        })
        .collect()
}
