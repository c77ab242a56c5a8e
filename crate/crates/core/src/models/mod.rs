//! The temporal-convolution classifier, the logistic-regression and MLP
//! baselines, and their training loop.

mod config;
mod network;
mod train;

pub use config::{predict_label, threshold_grid, Approach, ModelConfig};
pub use network::{Network, NetworkMeta};
pub use train::{fit, metrics_at, train, EpochRecord, TrainReport, TrainedModel};
