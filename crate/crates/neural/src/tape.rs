//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! Every operation evaluates eagerly, appends a node holding its value, and
//! refuses to produce NaN or infinity. [`Tape::backward`] walks the nodes in
//! reverse and returns gradients for every parameter that was read through
//! [`Tape::param`].
//!
//! Sequence batches use a flattened layout: a batch of `b` sequences of
//! length `l` with `k` features is a `(b * l) × k` matrix whose rows are
//! ordered by sequence, then time.

use crate::error::{NeuralError, Result};
use crate::params::{Gradients, ParamId, ParameterStore};
use crate::tensor::{gemm, Tensor, Transpose};

/// Lower clamp applied to probabilities inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param { id: ParamId, name: String },
    MatMul(Var, Var),
    AddBias(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    CausalUnfold { input: Var, geom: UnfoldGeometry },
    LastStep { input: Var, seq_len: usize },
    BceMean { probs: Var, targets: Vec<f64> },
}

/// Index bookkeeping for a causal unfold over a stored sequence tail.
#[derive(Debug, Clone, Copy)]
struct UnfoldGeometry {
    seq_len: usize,
    in_start: usize,
    out_start: usize,
    size: usize,
}

impl UnfoldGeometry {
    /// Stored input row (relative to the sequence) feeding block `j` of
    /// output row `t`, or `None` for front padding.
    fn source(&self, t: usize, j: usize) -> Option<usize> {
        let step = (self.out_start + t + j + 1).checked_sub(self.size)?;
        Some(step - self.in_start)
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, what: &str) -> Result<Var> {
        value.ensure_finite(what)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input; no gradient is reported for it.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, "input")
    }

    pub fn param(&mut self, store: &ParameterStore, id: ParamId) -> Result<Var> {
        let p = store.get(id);
        let name = p.name.clone();
        self.push(p.value.clone(), Op::Param { id, name }, &p.name)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, inner) = (self.value(a).rows(), self.value(a).cols());
        let (inner_b, n) = (self.value(b).rows(), self.value(b).cols());
        if inner != inner_b {
            return Err(NeuralError::Shape(format!(
                "matmul {}x{} by {}x{}",
                m, inner, inner_b, n
            )));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            inner,
            n,
            self.value(a).data(),
            self.value(b).data(),
            Transpose::None,
            0.0,
            &mut out,
        );
        self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), "matmul")
    }

    /// Adds a length-`cols` bias vector to every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        if self.value(bias).len() != cols {
            return Err(NeuralError::Shape(format!(
                "bias of {} values for {} columns",
                self.value(bias).len(),
                cols
            )));
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for row in out.data_mut().chunks_mut(cols) {
            for (o, bj) in row.iter_mut().zip(b) {
                *o += bj;
            }
        }
        self.push(out, Op::AddBias(x, bias), "add_bias")
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), "relu")
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x), "tanh")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x), "sigmoid")
    }

    /// Gathers, for every time step `t`, the rows `t - size + 1 ..= t` of the
    /// same sequence into one row of `size * k` values. Positions before the
    /// start of the sequence read as zeros.
    pub fn causal_unfold(&mut self, x: Var, seq_len: usize, size: usize) -> Result<Var> {
        self.causal_unfold_tail(x, seq_len, 0, 0, size)
    }

    /// Like [`Tape::causal_unfold`] for sequences stored from step
    /// `in_start` onward, producing rows for steps `out_start..seq_len` only.
    /// Every step an output row needs must be stored or lie before step 0.
    pub fn causal_unfold_tail(
        &mut self,
        x: Var,
        seq_len: usize,
        in_start: usize,
        out_start: usize,
        size: usize,
    ) -> Result<Var> {
        let xv = self.value(x);
        let (rows, k) = (xv.rows(), xv.cols());
        let geom = UnfoldGeometry {
            seq_len,
            in_start,
            out_start,
            size,
        };
        let len_in = seq_len.saturating_sub(in_start);
        let valid = size > 0
            && out_start < seq_len
            && len_in > 0
            && rows % len_in == 0
            && out_start >= in_start
            && (in_start == 0 || out_start + 1 >= size + in_start);
        if !valid {
            return Err(NeuralError::Shape(format!(
                "causal unfold of {rows} rows with {geom:?}"
            )));
        }
        let batch = rows / len_in;
        let width = size * k;
        let len_out = seq_len - out_start;
        let mut out = vec![0.0; batch * len_out * width];
        let src = xv.data();
        for b in 0..batch {
            for t in 0..len_out {
                let dst_row = b * len_out + t;
                let dst = &mut out[dst_row * width..(dst_row + 1) * width];
                for j in 0..size {
                    if let Some(from) = geom.source(t, j) {
                        let row = b * len_in + from;
                        dst[j * k..(j + 1) * k].copy_from_slice(&src[row * k..(row + 1) * k]);
                    }
                }
            }
        }
        let out = Tensor::new(vec![batch * len_out, width], out)?;
        self.push(out, Op::CausalUnfold { input: x, geom }, "causal_unfold")
    }

    /// Keeps only the final time step of every sequence.
    pub fn last_step(&mut self, x: Var, seq_len: usize) -> Result<Var> {
        let xv = self.value(x);
        let (rows, k) = (xv.rows(), xv.cols());
        if seq_len == 0 || rows % seq_len != 0 {
            return Err(NeuralError::Shape(format!(
                "last step of {} rows with sequence length {}",
                rows, seq_len
            )));
        }
        let batch = rows / seq_len;
        let mut out = Vec::with_capacity(batch * k);
        for b in 0..batch {
            let row = b * seq_len + seq_len - 1;
            out.extend_from_slice(&xv.data()[row * k..(row + 1) * k]);
        }
        let out = Tensor::new(vec![batch, k], out)?;
        self.push(out, Op::LastStep { input: x, seq_len }, "last_step")
    }

    /// Mean binary cross-entropy with probabilities clamped to
    /// `[BCE_EPS, 1 - BCE_EPS]`. No gradient flows through a clamped entry.
    pub fn bce_mean(&mut self, probs: Var, targets: &[f64]) -> Result<Var> {
        let p = self.value(probs);
        if p.len() != targets.len() || targets.is_empty() {
            return Err(NeuralError::Shape(format!(
                "{} probabilities for {} targets",
                p.len(),
                targets.len()
            )));
        }
        let loss = bce_mean(p.data(), targets);
        self.push(
            Tensor::scalar(loss),
            Op::BceMean {
                probs,
                targets: targets.to_vec(),
            },
            "bce_mean",
        )
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(NeuralError::Shape("backward from a non-scalar node".into()));
        }
        let mut adjoints: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        adjoints[loss.0] = Some(Tensor::scalar(1.0));
        let mut grads = Gradients::with_len(0);

        for idx in (0..=loss.0).rev() {
            let Some(dy) = adjoints[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param { id, name } => {
                    if !dy.is_finite() {
                        return Err(NeuralError::NonFiniteGradient(name.clone()));
                    }
                    grads.accumulate(*id, &dy.reshape(node.value.shape().to_vec())?);
                }
                Op::MatMul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let (m, inner, n) = (av.rows(), av.cols(), bv.cols());
                    let mut da = vec![0.0; m * inner];
                    gemm(m, n, inner, dy.data(), bv.data(), Transpose::Right, 0.0, &mut da);
                    let mut db = vec![0.0; inner * n];
                    gemm(inner, m, n, av.data(), dy.data(), Transpose::Left, 0.0, &mut db);
                    accumulate(&mut adjoints, *a, Tensor::new(av.shape().to_vec(), da)?);
                    accumulate(&mut adjoints, *b, Tensor::new(bv.shape().to_vec(), db)?);
                }
                Op::AddBias(x, bias) => {
                    let cols = node.value.cols();
                    let mut db = vec![0.0; cols];
                    for row in dy.data().chunks(cols) {
                        for (d, g) in db.iter_mut().zip(row) {
                            *d += g;
                        }
                    }
                    let bias_shape = self.value(*bias).shape().to_vec();
                    accumulate(&mut adjoints, *bias, Tensor::new(bias_shape, db)?);
                    accumulate(&mut adjoints, *x, dy);
                }
                Op::Relu(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        if *y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut adjoints, *x, dx);
                }
                Op::Tanh(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate(&mut adjoints, *x, dx);
                }
                Op::Sigmoid(x) => {
                    let mut dx = dy;
                    for (d, y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        *d *= y * (1.0 - y);
                    }
                    accumulate(&mut adjoints, *x, dx);
                }
                Op::CausalUnfold { input, geom } => {
                    let xv = self.value(*input);
                    let (rows, k) = (xv.rows(), xv.cols());
                    let width = geom.size * k;
                    let len_in = geom.seq_len - geom.in_start;
                    let len_out = geom.seq_len - geom.out_start;
                    let mut dx = vec![0.0; rows * k];
                    let g = dy.data();
                    for b in 0..rows / len_in {
                        for t in 0..len_out {
                            let src_row = b * len_out + t;
                            let src = &g[src_row * width..(src_row + 1) * width];
                            for j in 0..geom.size {
                                let Some(from) = geom.source(t, j) else {
                                    continue;
                                };
                                let row = b * len_in + from;
                                for (d, s) in dx[row * k..(row + 1) * k]
                                    .iter_mut()
                                    .zip(&src[j * k..(j + 1) * k])
                                {
                                    *d += s;
                                }
                            }
                        }
                    }
                    accumulate(&mut adjoints, *input, Tensor::new(xv.shape().to_vec(), dx)?);
                }
                Op::LastStep { input, seq_len } => {
                    let xv = self.value(*input);
                    let (rows, k) = (xv.rows(), xv.cols());
                    let mut dx = vec![0.0; rows * k];
                    for (b, g) in dy.data().chunks(k).enumerate() {
                        let row = b * seq_len + seq_len - 1;
                        dx[row * k..(row + 1) * k].copy_from_slice(g);
                    }
                    accumulate(&mut adjoints, *input, Tensor::new(xv.shape().to_vec(), dx)?);
                }
                Op::BceMean { probs, targets } => {
                    let pv = self.value(*probs);
                    let scale = dy.data()[0] / targets.len() as f64;
                    let dp = pv
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&p, &y)| {
                            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&p) {
                                0.0
                            } else {
                                -scale * (y / p - (1.0 - y) / (1.0 - p))
                            }
                        })
                        .collect();
                    accumulate(&mut adjoints, *probs, Tensor::new(pv.shape().to_vec(), dp)?);
                }
            }
        }
        Ok(grads)
    }
}

fn accumulate(adjoints: &mut [Option<Tensor>], v: Var, grad: Tensor) {
    match &mut adjoints[v.0] {
        Some(existing) => existing.add_assign(&grad),
        slot => *slot = Some(grad),
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean clamped binary cross-entropy, outside any tape.
pub fn bce_mean(probs: &[f64], targets: &[f64]) -> f64 {
    let total: f64 = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / targets.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_at_half_is_ln2() {
        for target in [0.0, 1.0] {
            let mut tape = Tape::new();
            let p = tape.input(Tensor::scalar(0.5)).unwrap();
            let loss = tape.bce_mean(p, &[target]).unwrap();
            assert!((tape.value(loss).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn bce_saturated_is_near_zero() {
        assert!(bce_mean(&[1.0], &[1.0]) <= 1e-11);
        assert!(bce_mean(&[0.0], &[0.0]) <= 1e-11);
    }

    #[test]
    fn bce_batch_mean_matches_sum_over_size() {
        let probs = [0.1, 0.4, 0.75, 0.99, 0.5];
        let targets = [0.0, 1.0, 1.0, 0.0, 1.0];
        let sum: f64 = probs
            .iter()
            .zip(&targets)
            .map(|(p, y)| bce_mean(&[*p], &[*y]))
            .sum();
        assert!((bce_mean(&probs, &targets) - sum / probs.len() as f64).abs() < 1e-14);
    }

    #[test]
    fn logit_gradient_at_half_is_minus_half() {
        let mut store = ParameterStore::new();
        let id = store.add("logit", Tensor::new(vec![1, 1], vec![0.0]).unwrap());
        let mut tape = Tape::new();
        let z = tape.param(&store, id).unwrap();
        let p = tape.sigmoid(z).unwrap();
        let loss = tape.bce_mean(p, &[1.0]).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert!((grads.get(id).unwrap().data()[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn clamped_probability_blocks_gradient() {
        let mut store = ParameterStore::new();
        let id = store.add("p", Tensor::new(vec![1, 1], vec![1.0]).unwrap());
        let mut tape = Tape::new();
        let p = tape.param(&store, id).unwrap();
        let loss = tape.bce_mean(p, &[1.0]).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(id).unwrap().data()[0], 0.0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut tape = Tape::new();
        let bad = Tensor::new(vec![1, 2], vec![0.0, f64::NAN]).unwrap();
        assert!(tape.input(bad).is_err());
    }

    #[test]
    fn unfold_pads_the_front_with_zeros() {
        let mut tape = Tape::new();
        // two sequences of length 3, one feature
        let x = tape
            .input(Tensor::new(vec![6, 1], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        let z = tape.causal_unfold(x, 3, 2).unwrap();
        assert_eq!(
            tape.value(z).data(),
            &[0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 0.0, 4.0, 4.0, 5.0, 5.0, 6.0]
        );
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
