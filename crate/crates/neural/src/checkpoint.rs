//! JSON checkpoints: `{version, config, parameters: name -> {shape, values}}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: serde_json::Value,
    pub parameters: BTreeMap<String, ParamRecord>,
}

impl Checkpoint {
    pub fn capture(config: serde_json::Value, store: &ParameterStore) -> Self {
        let parameters = store
            .iter()
            .map(|(_, p)| {
                (
                    p.name.clone(),
                    ParamRecord {
                        shape: p.value.shape().to_vec(),
                        values: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            config,
            parameters,
        }
    }

    /// Copies the recorded values into `store`, which must already have been
    /// built from the same configuration.
    pub fn restore_into(&self, store: &mut ParameterStore) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported version {}",
                self.version
            )));
        }
        let values = self
            .parameters
            .iter()
            .map(|(name, rec)| Ok((name.clone(), Tensor::new(rec.shape.clone(), rec.values.clone())?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        store.load_values(&values)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
