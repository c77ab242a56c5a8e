//! Mini-batch Adam training with best-validation-F1 selection.

use std::time::{Duration, Instant};

use girder_neural::layers::bce_loss;
use girder_neural::{adam_step, AdamConfig, Checkpoint, NeuralError, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{predict_label, threshold_grid, ModelConfig};
use super::network::{Network, NetworkMeta};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::evaluation::{prf1, Metrics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    /// Threshold the validation F1 was measured at.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch (1-based) whose parameters were kept; `None` if none ran.
    pub best_epoch: Option<usize>,
    pub threshold: f64,
    pub f1_val: Option<f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Validation metrics at `threshold`.
pub fn metrics_at(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Metrics> {
    let preds: Vec<u8> = scores.iter().map(|&s| predict_label(s, threshold)).collect();
    prf1(&preds, labels)
}

fn pick_threshold(config: &ModelConfig, scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    let candidates = if config.tune_threshold {
        threshold_grid()
    } else {
        vec![config.threshold]
    };
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for t in candidates {
        let f1 = metrics_at(scores, labels, t)?.f1;
        if f1 > best.1 {
            best = (t, f1);
        }
    }
    Ok(best)
}

fn diverged(epoch: usize, batch: usize, err: Error) -> Error {
    match err {
        Error::Neural(NeuralError::NonFinite(what) | NeuralError::NonFiniteGradient(what)) => Error::Numerical(
            format!("training diverged in epoch {epoch}, batch {batch}: non-finite {what}"),
        ),
        other => other,
    }
}

/// Trains on `train`, scoring `val` after every epoch, and returns the
/// parameters of the epoch with the highest validation F1 (the earliest on
/// ties).
pub fn train(config: &ModelConfig, n_sensors: usize, train: &[Sample<'_>], val: &[Sample<'_>]) -> Result<(Network, TrainReport)> {
    let started = Instant::now();
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Invalid("training and validation sets must be nonempty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Network::init(config, n_sensors, &mut rng)?;
    let adam = AdamConfig::with_lr(config.lr);
    let val_labels: Vec<u8> = val.iter().map(|s| s.label).collect();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport {
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: None,
        threshold: config.threshold,
        f1_val: None,
        wall_time: Duration::ZERO,
    };
    let mut best_values = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let windows: Vec<&[f64]> = chunk.iter().map(|&i| train[i].window).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| f64::from(train[i].label)).collect();
            let mut tape = Tape::new();
            let ctx = |e: Error| diverged(epoch, b, e);
            let x = tape.input(net.batch_input(&windows)?)?;
            let probs = net.forward(&mut tape, x).map_err(ctx)?;
            let loss = bce_loss(&mut tape, probs, &targets).map_err(|e| ctx(e.into()))?;
            let grads = tape.backward(loss).map_err(|e| ctx(e.into()))?;
            adam_step(net.store_mut(), &grads, &adam).map_err(|e| ctx(e.into()))?;
            let loss = tape.value(loss).data()[0];
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / train.len() as f64;
        let scores = net.score_samples(val)?;
        let (threshold, val_f1) = pick_threshold(config, &scores, &val_labels)?;
        log::debug!("{} epoch {epoch}: loss {train_loss:.5}, val F1 {val_f1:.4}", config.approach.as_str());
        report.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_f1,
            threshold,
        });
        if report.f1_val.is_none_or(|best| val_f1 > best) {
            report.best_epoch = Some(epoch);
            report.f1_val = Some(val_f1);
            report.threshold = threshold;
            best_values = Some(net.store().values_by_name());
        }
    }
    if let Some(values) = best_values {
        net.store_mut().load_values(&values)?;
    }
    report.wall_time = started.elapsed();
    Ok((net, report))
}

/// Trained network together with the cutoff chosen on validation data.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub network: Network,
    pub report: TrainReport,
}

impl TrainedModel {
    pub fn threshold(&self) -> f64 {
        self.report.threshold
    }

    pub fn predict(&self, samples: &[Sample<'_>]) -> Result<Vec<u8>> {
        let t = self.threshold();
        Ok(self
            .network
            .score_samples(samples)?
            .into_iter()
            .map(|s| predict_label(s, t))
            .collect())
    }

    pub fn checkpoint(&self, config_digest: Option<String>) -> Result<Checkpoint> {
        self.network.checkpoint(config_digest, Some(self.threshold()))
    }

    /// Restores a trained model. The per-epoch history is not stored, so
    /// the report only carries the threshold.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<(Self, NetworkMeta)> {
        let (network, meta) = Network::from_checkpoint(ckpt)?;
        let report = TrainReport {
            epochs: Vec::new(),
            best_epoch: None,
            threshold: meta.threshold.unwrap_or(meta.model.threshold),
            f1_val: None,
            wall_time: Duration::ZERO,
        };
        Ok((Self { network, report }, meta))
    }

    pub fn evaluate(&self, samples: &[Sample<'_>]) -> Result<Metrics> {
        let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();
        prf1(&self.predict(samples)?, &labels)
    }
}

pub fn fit(config: &ModelConfig, n_sensors: usize, train_set: &[Sample<'_>], val: &[Sample<'_>]) -> Result<TrainedModel> {
    let (network, report) = train(config, n_sensors, train_set, val)?;
    Ok(TrainedModel { network, report })
}
