use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub gradient: Tensor,
}

/// Named, ordered collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Validation(format!("duplicate parameter name {name:?}")));
        }
        let id = ParamId(self.params.len());
        let gradient = tensor.map(|_| 0.0);
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter {
            name,
            tensor,
            gradient,
        });
        Ok(id)
    }

    /// Weight matrix drawn uniformly from `±sqrt(6 / (rows + cols))`.
    pub fn add_xavier<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-limit..=limit))
            .collect();
        self.add(name, Tensor::matrix(rows, cols, data)?)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId> {
        self.add(name, Tensor::zeros(rows, cols))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.gradient.data_mut().fill(0.0);
        }
    }

    /// Replaces parameter values by name, checking shapes.
    pub fn load_values(&mut self, values: &[(String, Tensor)]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Validation(format!(
                "checkpoint has {} parameters, model expects {}",
                values.len(),
                self.params.len()
            )));
        }
        for (name, t) in values {
            let id = self
                .id_of(name)
                .ok_or_else(|| Error::Validation(format!("unknown parameter {name:?}")))?;
            let p = &mut self.params[id.0];
            if p.tensor.shape() != t.shape() {
                return Err(Error::Validation(format!(
                    "parameter {name:?} has shape {:?}, checkpoint has {:?}",
                    p.tensor.shape(),
                    t.shape()
                )));
            }
            p.tensor = t.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn xavier_bounds_and_names() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::new();
        let w = s.add_xavier("w", 4, 2, &mut rng).unwrap();
        let limit = 1.0f64;
        assert!(s.get(w).tensor.data().iter().all(|v| v.abs() <= limit));
        assert!(s.add_zeros("w", 1, 1).is_err());
        let b = s.add_zeros("b", 1, 2).unwrap();
        assert_eq!(s.id_of("b"), Some(b));
        assert_eq!(s.scalar_count(), 10);
        assert_eq!(s.get(w).gradient.shape(), &[4, 2]);
    }
}
