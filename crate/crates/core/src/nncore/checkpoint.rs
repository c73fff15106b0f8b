//! JSON parameter container.
//!
//! ```json
//! {
//!   "format": "emphasis-checkpoint",
//!   "version": 1,
//!   "architecture": "char_word",
//!   "seed": 7,
//!   "config": { ... },
//!   "metadata": { ... },
//!   "parameters": [ { "name": "word_emb", "shape": [20, 16], "values": [ ... ] } ]
//! }
//! ```
//!
//! `config` holds the architecture hyperparameters, `metadata` anything else
//! the model needs to rebuild itself (vocabularies, training log). Values
//! are stored row-major with shortest round-trip float formatting, so
//! identical parameters always serialize to identical bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "emphasis-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: String,
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(default)]
    pub metadata: serde_json::Value,
    pub parameters: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_store(
        architecture: &str,
        seed: u64,
        config: serde_json::Value,
        metadata: serde_json::Value,
        store: &ParamStore,
    ) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            architecture: architecture.to_string(),
            seed,
            config,
            metadata,
            parameters: store
                .iter()
                .map(|(_, p)| NamedTensor {
                    name: p.name.clone(),
                    shape: p.tensor.shape().to_vec(),
                    values: p.tensor.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn tensors(&self) -> Result<Vec<(String, Tensor)>> {
        self.parameters
            .iter()
            .map(|p| Ok((p.name.clone(), Tensor::new(p.shape.clone(), p.values.clone())?)))
            .collect()
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(input)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported checkpoint {:?} version {}",
                ck.format, ck.version
            )));
        }
        Ok(ck)
    }
}
