//! Classifier graphs and parameter management.

use girder_neural::layers::{conv1d_causal_tail, conv1d_pointwise, dense, dense_sigmoid};
use girder_neural::{Activation, Checkpoint, ParamId, ParameterStore, Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Approach, ModelConfig};
use crate::dataset::Sample;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Layout {
    Dovi {
        map: (ParamId, ParamId),
        temporal: Vec<(ParamId, ParamId)>,
        head: (ParamId, ParamId),
    },
    Dense {
        hidden: Vec<(ParamId, ParamId)>,
        head: (ParamId, ParamId),
    },
}

/// What a checkpoint records besides the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub model: ModelConfig,
    pub n_sensors: usize,
    pub config_digest: Option<String>,
    /// Decision threshold picked during training, if any.
    #[serde(default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Network {
    config: ModelConfig,
    n_sensors: usize,
    store: ParameterStore,
    layout: Layout,
}

/// Inputs per inference chunk.
const SCORE_CHUNK: usize = 1024;

impl Network {
    /// Fresh parameters drawn from `rng`.
    pub fn init(config: &ModelConfig, n_sensors: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        if n_sensors == 0 {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        let mut store = ParameterStore::new();
        let layout = match config.approach {
            Approach::Dovi => {
                let k = config.filters;
                let map = (
                    store.add_he_uniform("map.w", n_sensors, k, rng),
                    store.add_zeros("map.b", vec![k]),
                );
                let temporal = (0..config.layers)
                    .map(|j| {
                        (
                            store.add_he_uniform(format!("temporal{j}.w"), config.filter_size * k, k, rng),
                            store.add_zeros(format!("temporal{j}.b"), vec![k]),
                        )
                    })
                    .collect();
                let head = (store.add_he_uniform("head.w", k, 1, rng), store.add_zeros("head.b", vec![1]));
                Layout::Dovi { map, temporal, head }
            }
            Approach::Lr | Approach::Mlp => {
                let widths: &[usize] = if config.approach == Approach::Mlp {
                    &config.hidden
                } else {
                    &[]
                };
                let mut fan_in = config.window * n_sensors;
                let mut hidden = Vec::with_capacity(widths.len());
                for (j, &w) in widths.iter().enumerate() {
                    hidden.push((
                        store.add_he_uniform(format!("dense{j}.w"), fan_in, w, rng),
                        store.add_zeros(format!("dense{j}.b"), vec![w]),
                    ));
                    fan_in = w;
                }
                let head = (
                    store.add_he_uniform("head.w", fan_in, 1, rng),
                    store.add_zeros("head.b", vec![1]),
                );
                Layout::Dense { hidden, head }
            }
        };
        Ok(Self {
            config: config.clone(),
            n_sensors,
            store,
            layout,
        })
    }

    /// Parameters seeded from `config.seed`.
    pub fn new(config: &ModelConfig, n_sensors: usize) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init(config, n_sensors, &mut rng)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    /// Input tensor for a batch of windows: `(batch * l) x n` for the
    /// convolutional model, `batch x (l * n)` for the dense ones. Both share
    /// the same row-major data.
    pub fn batch_input(&self, windows: &[&[f64]]) -> Result<Tensor> {
        let l = self.config.window;
        let n = self.n_sensors;
        let mut data = Vec::with_capacity(windows.len() * l * n);
        for w in windows {
            if w.len() != l * n {
                return Err(Error::Invalid(format!(
                    "window of {} values, expected {l} x {n}",
                    w.len()
                )));
            }
            data.extend_from_slice(w);
        }
        let shape = match self.layout {
            Layout::Dovi { .. } => vec![windows.len() * l, n],
            Layout::Dense { .. } => vec![windows.len(), l * n],
        };
        Ok(Tensor::new(shape, data)?)
    }

    /// Records the forward pass for `input` and returns the `batch x 1`
    /// score node.
    pub fn forward(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let p = |tape: &mut Tape, id| tape.param(&self.store, id);
        let out = match &self.layout {
            Layout::Dovi { map, temporal, head } => {
                let (w, b) = (p(tape, map.0)?, p(tape, map.1)?);
                let mut h = conv1d_pointwise(tape, input, w, b)?;
                // Only the final step reaches the head, so each temporal layer
                // is evaluated on the steps that feed it and nothing earlier.
                let l = self.config.window;
                let s = self.config.filter_size;
                let c = temporal.len();
                let mut in_start = 0;
                for (j, &(wid, bid)) in temporal.iter().enumerate() {
                    let out_start = (l - 1).saturating_sub((c - 1 - j) * (s - 1));
                    let (w, b) = (p(tape, wid)?, p(tape, bid)?);
                    h = conv1d_causal_tail(tape, h, l, in_start, out_start, s, w, b, self.config.activation)?;
                    in_start = out_start;
                }
                let last = tape.last_step(h, l - in_start)?;
                let (w, b) = (p(tape, head.0)?, p(tape, head.1)?);
                dense_sigmoid(tape, last, w, b)?
            }
            Layout::Dense { hidden, head } => {
                let mut h = input;
                for &(wid, bid) in hidden {
                    let (w, b) = (p(tape, wid)?, p(tape, bid)?);
                    h = dense(tape, h, w, b, Activation::Relu)?;
                }
                let (w, b) = (p(tape, head.0)?, p(tape, head.1)?);
                dense_sigmoid(tape, h, w, b)?
            }
        };
        Ok(out)
    }

    /// Score of one `l x n` window.
    pub fn score(&self, window: &[f64]) -> Result<f64> {
        Ok(self.score_windows(&[window])?[0])
    }

    pub fn score_windows(&self, windows: &[&[f64]]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(SCORE_CHUNK) {
            let mut tape = Tape::new();
            let x = tape.input(self.batch_input(chunk)?)?;
            let probs = self.forward(&mut tape, x)?;
            out.extend_from_slice(tape.value(probs).data());
        }
        Ok(out)
    }

    pub fn score_samples(&self, samples: &[Sample<'_>]) -> Result<Vec<f64>> {
        let windows: Vec<&[f64]> = samples.iter().map(|s| s.window).collect();
        self.score_windows(&windows)
    }

    pub fn checkpoint(&self, config_digest: Option<String>, threshold: Option<f64>) -> Result<Checkpoint> {
        let meta = NetworkMeta {
            model: self.config.clone(),
            n_sensors: self.n_sensors,
            config_digest,
            threshold,
        };
        Ok(Checkpoint::capture(serde_json::to_value(meta)?, &self.store))
    }

    /// Rebuilds the network a checkpoint describes and loads its weights.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, NetworkMeta)> {
        let meta: NetworkMeta = serde_json::from_value(ckpt.config.clone())?;
        let mut net = Self::new(&meta.model, meta.n_sensors)?;
        ckpt.restore_into(&mut net.store)?;
        Ok((net, meta))
    }
}
