use girder_neural::Activation;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// Feature mapping, stacked causal convolutions and a sigmoid head.
    #[default]
    Dovi,
    /// Logistic regression on the flattened window.
    Lr,
    /// Fully connected ReLU network on the flattened window.
    Mlp,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Dovi => "dovi",
            Approach::Lr => "lr",
            Approach::Mlp => "mlp",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dovi" => Ok(Approach::Dovi),
            "lr" => Ok(Approach::Lr),
            "mlp" | "dnn" => Ok(Approach::Mlp),
            other => Err(Error::Config(format!("unknown approach {other:?}"))),
        }
    }
}

/// Architecture and training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub approach: Approach,
    /// Input sequence length `l`.
    pub window: usize,
    /// Stacked temporal layers `c`.
    pub layers: usize,
    /// Temporal filter size `s`.
    pub filter_size: usize,
    /// Filter count `k`.
    pub filters: usize,
    /// Activation of the temporal layers.
    pub activation: Activation,
    /// Hidden widths of the fully connected baseline.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Score cutoff; a score strictly above it is labelled positive.
    pub threshold: f64,
    /// Pick the threshold from 0.1..=0.9 by validation F1 each epoch.
    pub tune_threshold: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            approach: Approach::Dovi,
            window: 8,
            layers: 3,
            filter_size: 3,
            filters: 64,
            activation: Activation::Relu,
            hidden: vec![64, 64],
            lr: 0.002,
            batch_size: 128,
            epochs: 50,
            threshold: 0.5,
            tune_threshold: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn for_approach(approach: Approach) -> Self {
        Self {
            approach,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.window < 1 {
            return fail("window must be at least 1".into());
        }
        if self.approach == Approach::Dovi {
            if self.filter_size < 1 || self.filter_size > self.window {
                return fail(format!(
                    "filter size {} must lie in 1..={}",
                    self.filter_size, self.window
                ));
            }
            if self.filters < 1 || self.layers < 1 {
                return fail("filters and layers must be at least 1".into());
            }
        }
        if self.approach == Approach::Mlp && (self.hidden.is_empty() || self.hidden.contains(&0)) {
            return fail("hidden widths must be positive".into());
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("learning rate {} must be positive", self.lr));
        }
        if self.batch_size < 1 {
            return fail("batch size must be at least 1".into());
        }
        Ok(())
    }
}

/// 1 iff `score > threshold`.
pub fn predict_label(score: f64, threshold: f64) -> u8 {
    u8::from(score > threshold)
}

/// Candidate thresholds when tuning on validation data.
pub fn threshold_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}
