//! Named trainable parameters with their Adam moment accumulators.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NeuralError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    first_moment: Tensor,
    second_moment: Tensor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Parameter>,
    adam_steps: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Moments start at zero.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let shape = value.shape().to_vec();
        self.params.push(Parameter {
            name: name.into(),
            value,
            first_moment: Tensor::zeros(shape.clone()),
            second_moment: Tensor::zeros(shape),
        });
        ParamId(self.params.len() - 1)
    }

    /// Weight matrix of shape `[fan_in, fan_out]` drawn from
    /// `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`.
    pub fn add_he_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = (6.0 / fan_in.max(1) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let value = Tensor::new(vec![fan_in, fan_out], data).expect("shape matches data");
        self.add(name, value)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn adam_steps(&self) -> u64 {
        self.adam_steps
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Snapshot of the parameter values keyed by name.
    pub fn values_by_name(&self) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.clone()))
            .collect()
    }

    /// Overwrites values from a snapshot, checking names and shapes.
    pub fn load_values(&mut self, values: &BTreeMap<String, Tensor>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(NeuralError::Checkpoint(format!(
                "expected {} parameters, found {}",
                self.params.len(),
                values.len()
            )));
        }
        for p in &mut self.params {
            let v = values
                .get(&p.name)
                .ok_or_else(|| NeuralError::UnknownParameter(p.name.clone()))?;
            if v.shape() != p.value.shape() {
                return Err(NeuralError::Shape(format!(
                    "parameter `{}` expects {:?}, got {:?}",
                    p.name,
                    p.value.shape(),
                    v.shape()
                )));
            }
            v.ensure_finite(&p.name)?;
            p.value = v.clone();
        }
        Ok(())
    }
}

/// Gradients indexed by parameter; `None` means the parameter did not take
/// part in the recorded computation.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub(crate) fn with_len(len: usize) -> Self {
        Self {
            grads: vec![None; len],
        }
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, grad: &Tensor) {
        if self.grads.len() <= id.0 {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(g) => g.add_assign(grad),
            slot => *slot = Some(grad.clone()),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter in the store.
/// Parameters without a gradient are updated as if their gradient were zero.
pub fn adam_step(store: &mut ParameterStore, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    store.adam_steps += 1;
    let t = store.adam_steps as i32;
    let correction1 = 1.0 - cfg.beta1.powi(t);
    let correction2 = 1.0 - cfg.beta2.powi(t);
    for (i, p) in store.params.iter_mut().enumerate() {
        let grad = grads.get(ParamId(i));
        if let Some(g) = grad {
            if g.shape() != p.value.shape() {
                return Err(NeuralError::Shape(format!(
                    "gradient for `{}` has shape {:?}, parameter {:?}",
                    p.name,
                    g.shape(),
                    p.value.shape()
                )));
            }
            if !g.is_finite() {
                return Err(NeuralError::NonFiniteGradient(p.name.clone()));
            }
        }
        let m = p.first_moment.data_mut();
        let v = p.second_moment.data_mut();
        let theta = p.value.data_mut();
        for j in 0..theta.len() {
            let gj = grad.map_or(0.0, |g| g.data()[j]);
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            theta[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
