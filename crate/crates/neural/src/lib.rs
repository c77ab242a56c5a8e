//! Minimal tensor and reverse-mode differentiation engine for causal
//! temporal convolution classifiers.
//!
//! The engine is deliberately narrow: 2-D `f64` tensors, a recording
//! [`Tape`] with the handful of operations a feature-mapping convolution,
//! stacked causal convolutions and a sigmoid head need, binary
//! cross-entropy, and Adam.

pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Checkpoint, ParamRecord};
pub use error::{NeuralError, Result};
pub use layers::Activation;
pub use params::{adam_step, AdamConfig, Gradients, ParamId, Parameter, ParameterStore};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
