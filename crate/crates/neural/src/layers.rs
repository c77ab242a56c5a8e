//! Layer building blocks recorded on a [`Tape`].
//!
//! Weight layouts:
//! - feature mapping: `[n, k]`, column `m` is the filter applied to one
//!   instant's `n` sensor readings;
//! - temporal convolution: `[size * k, k]`, column `m` is a `size × k`
//!   filter flattened oldest time offset first;
//! - dense head: `[k, 1]` plus a one-element bias.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Identity => Ok(x),
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

/// Width-one convolution followed by ReLU: maps each instant's `n` readings
/// to `k` features. `x` is `(batch * l) × n`.
pub fn conv1d_pointwise(tape: &mut Tape, x: Var, filters: Var, biases: Var) -> Result<Var> {
    let z = tape.matmul(x, filters)?;
    let z = tape.add_bias(z, biases)?;
    tape.relu(z)
}

/// Causal temporal convolution of filter size `size` over sequences of
/// length `seq_len`, padded with `size - 1` zeros in front so that length and
/// feature count are preserved.
pub fn conv1d_causal(
    tape: &mut Tape,
    x: Var,
    seq_len: usize,
    size: usize,
    filters: Var,
    biases: Var,
    activation: Activation,
) -> Result<Var> {
    let patches = tape.causal_unfold(x, seq_len, size)?;
    let z = tape.matmul(patches, filters)?;
    let z = tape.add_bias(z, biases)?;
    activation.apply(tape, z)
}

/// [`conv1d_causal`] evaluated only at steps `out_start..seq_len`, reading
/// an input that holds steps `in_start..seq_len`. Outputs equal the
/// corresponding rows of the full layer.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_causal_tail(
    tape: &mut Tape,
    x: Var,
    seq_len: usize,
    in_start: usize,
    out_start: usize,
    size: usize,
    filters: Var,
    biases: Var,
    activation: Activation,
) -> Result<Var> {
    let patches = tape.causal_unfold_tail(x, seq_len, in_start, out_start, size)?;
    let z = tape.matmul(patches, filters)?;
    let z = tape.add_bias(z, biases)?;
    activation.apply(tape, z)
}

/// `sigmoid(y · w + b)` per row of `y`.
pub fn dense_sigmoid(tape: &mut Tape, y: Var, weights: Var, bias: Var) -> Result<Var> {
    let z = tape.matmul(y, weights)?;
    let z = tape.add_bias(z, bias)?;
    tape.sigmoid(z)
}

/// Fully connected layer with an activation, used by the baselines.
pub fn dense(tape: &mut Tape, x: Var, weights: Var, bias: Var, activation: Activation) -> Result<Var> {
    let z = tape.matmul(x, weights)?;
    let z = tape.add_bias(z, bias)?;
    activation.apply(tape, z)
}

pub fn bce_loss(tape: &mut Tape, probs: Var, targets: &[f64]) -> Result<Var> {
    tape.bce_mean(probs, targets)
}
