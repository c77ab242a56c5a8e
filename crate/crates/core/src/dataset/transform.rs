//! Normalization, noise, windowing and the temporal split.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structure::ResponseMatrix;

/// Per-sensor centring and scaling constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Largest absolute raw value of each sensor.
    pub max_abs: Vec<f64>,
}

impl NormStats {
    /// Statistics over the instants in `range`.
    pub fn fit(resp: &ResponseMatrix, range: Range<usize>) -> Result<Self> {
        if range.is_empty() || range.end > resp.n_instants() {
            return Err(Error::Invalid(format!(
                "cannot fit normalization on instants {range:?} of {}",
                resp.n_instants()
            )));
        }
        let n = resp.n_sensors;
        let mut mean = vec![0.0; n];
        let mut max_abs = vec![0.0f64; n];
        for t in range.clone() {
            for (i, &v) in resp.row(t).iter().enumerate() {
                mean[i] += v;
                max_abs[i] = max_abs[i].max(v.abs());
            }
        }
        let count = range.len() as f64;
        mean.iter_mut().for_each(|m| *m /= count);
        Ok(Self { mean, max_abs })
    }
}

/// `(x - mean) / max_abs` per column. Columns whose max-abs is zero become
/// zeros; their indices are returned.
pub fn normalize(resp: &ResponseMatrix, stats: &NormStats) -> Result<(ResponseMatrix, Vec<usize>)> {
    let n = resp.n_sensors;
    if stats.mean.len() != n || stats.max_abs.len() != n {
        return Err(Error::Invalid(format!("normalization has {} columns, response has {n}", stats.mean.len())));
    }
    if stats.mean.iter().chain(&stats.max_abs).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("normalization constants are not finite".into()));
    }
    let degenerate: Vec<usize> = (0..n).filter(|&i| stats.max_abs[i] == 0.0).collect();
    for &i in &degenerate {
        log::warn!("sensor {i} never moves; its column is set to zero");
    }
    let mut values = resp.values.clone();
    for row in values.chunks_mut(n) {
        for (i, v) in row.iter_mut().enumerate() {
            *v = if stats.max_abs[i] == 0.0 {
                0.0
            } else {
                (*v - stats.mean[i]) / stats.max_abs[i]
            };
        }
    }
    let out = ResponseMatrix::new(values, n, resp.sample_dt, resp.sensor_positions.clone())?;
    Ok((out, degenerate))
}

/// Adds i.i.d. `N(0, sigma)` to every entry, row by row. `sigma = 0` leaves
/// the input untouched and draws nothing.
pub fn inject_noise(resp: &ResponseMatrix, sigma: f64, seed: u64) -> Result<ResponseMatrix> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Config(format!("noise level {sigma} must be a finite non-negative number")));
    }
    if sigma == 0.0 {
        return Ok(resp.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = resp.clone();
    for v in &mut out.values {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}

/// One input window and its label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<'a> {
    /// `l x n`, row-major, oldest instant first.
    pub window: &'a [f64],
    pub n_sensors: usize,
    pub label: u8,
    /// Index of the window's last instant.
    pub end_instant: usize,
}

/// Every window of `l` consecutive instants; window `k` covers
/// `k..k + l` and takes the label of its last instant.
pub fn slice<'a>(resp: &'a ResponseMatrix, labels: &[u8], l: usize) -> Result<Vec<Sample<'a>>> {
    let n_instants = resp.n_instants();
    if labels.len() != n_instants {
        return Err(Error::Invalid(format!("{} labels for {n_instants} instants", labels.len())));
    }
    if l == 0 || n_instants < l {
        return Err(Error::Invalid(format!("cannot cut windows of {l} from {n_instants} instants")));
    }
    let n = resp.n_sensors;
    Ok((0..=n_instants - l)
        .map(|k| Sample {
            window: &resp.values[k * n..(k + l) * n],
            n_sensors: n,
            label: labels[k + l - 1],
            end_instant: k + l - 1,
        })
        .collect())
}

/// Contiguous, ordered sample ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitSpec {
    /// Train and validation sizes are `floor(ratio * basis)`; the test set
    /// takes whatever remains of `n_samples`. With `basis` equal to the
    /// instant count the first training and validation blocks keep their
    /// nominal sizes and the windowing loss falls on the test set.
    pub fn from_ratios(n_samples: usize, basis: usize, ratios: [f64; 3]) -> Result<Self> {
        let total: f64 = ratios.iter().sum();
        if ratios.iter().any(|r| !(*r >= 0.0)) || !(total > 0.0) {
            return Err(Error::Config(format!("split ratios {ratios:?} are invalid")));
        }
        let part = |r: f64| (basis as f64 * r / total + 1e-9).floor() as usize;
        let (n_train, n_val) = (part(ratios[0]), part(ratios[1]));
        if n_train + n_val > n_samples {
            return Err(Error::Config(format!(
                "split of {n_train} + {n_val} does not fit {n_samples} samples"
            )));
        }
        Ok(Self {
            train: 0..n_train,
            val: n_train..n_train + n_val,
            test: n_train + n_val..n_samples,
        })
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        let ordered = self.train.start == 0
            && self.train.start <= self.train.end
            && self.train.end == self.val.start
            && self.val.start <= self.val.end
            && self.val.end == self.test.start
            && self.test.start <= self.test.end
            && self.test.end == n_samples;
        if ordered {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "split {self:?} does not tile {n_samples} samples in order"
            )))
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Cuts `samples` at the split boundaries without reordering.
pub fn split<'s, T>(samples: &'s [T], spec: &SplitSpec) -> Result<(&'s [T], &'s [T], &'s [T])> {
    spec.validate(samples.len())?;
    Ok((&samples[spec.train.clone()], &samples[spec.val.clone()], &samples[spec.test.clone()]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareParams {
    pub window: usize,
    pub sigma: f64,
    pub noise_seed: u64,
    pub ratios: [f64; 3],
    /// Count the split ratios apply to; the instant count when `None`.
    pub split_basis: Option<usize>,
}

impl Default for PrepareParams {
    fn default() -> Self {
        Self {
            window: 8,
            sigma: 0.0,
            noise_seed: 0,
            ratios: [6.0, 2.0, 2.0],
            split_basis: None,
        }
    }
}

/// Normalized, optionally noisy series with labels and its split.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDataset {
    pub series: ResponseMatrix,
    pub labels: Vec<u8>,
    pub window: usize,
    pub split: SplitSpec,
    pub norm: NormStats,
}

impl PreparedDataset {
    pub fn n_sensors(&self) -> usize {
        self.series.n_sensors
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len() + 1 - self.window
    }

    pub fn sample(&self, k: usize) -> Sample<'_> {
        let n = self.series.n_sensors;
        let l = self.window;
        Sample {
            window: &self.series.values[k * n..(k + l) * n],
            n_sensors: n,
            label: self.labels[k + l - 1],
            end_instant: k + l - 1,
        }
    }

    pub fn samples(&self, range: Range<usize>) -> Vec<Sample<'_>> {
        range.map(|k| self.sample(k)).collect()
    }

    pub fn positive_rate(&self) -> f64 {
        let ones = (0..self.n_samples()).filter(|&k| self.sample(k).label == 1).count();
        ones as f64 / self.n_samples() as f64
    }
}

/// Fits normalization on the instants the training windows touch, applies
/// it to the whole series, then adds noise.
pub fn prepare(resp: &ResponseMatrix, labels: &[u8], params: &PrepareParams) -> Result<PreparedDataset> {
    let n_instants = resp.n_instants();
    if labels.len() != n_instants {
        return Err(Error::Invalid(format!("{} labels for {n_instants} instants", labels.len())));
    }
    let l = params.window;
    if l == 0 || n_instants < l {
        return Err(Error::Invalid(format!("cannot cut windows of {l} from {n_instants} instants")));
    }
    let n_samples = n_instants - l + 1;
    let split = SplitSpec::from_ratios(n_samples, params.split_basis.unwrap_or(n_instants), params.ratios)?;
    if split.train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let norm = NormStats::fit(resp, 0..split.train.end + l - 1)?;
    let (normalized, _) = normalize(resp, &norm)?;
    let series = inject_noise(&normalized, params.sigma, params.noise_seed)?;
    Ok(PreparedDataset {
        series,
        labels: labels.to_vec(),
        window: l,
        split,
        norm,
    })
}
