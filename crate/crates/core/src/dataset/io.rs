//! Dataset CSV (`t_index,sensor_0..,label`) with a JSON sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sections::SectionMap;
use super::transform::{NormStats, PreparedDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::io_util::{write_atomic, write_json_atomic};
use crate::structure::ResponseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub preset: String,
    pub response_model: String,
    pub norm: NormStats,
    /// Which instants the normalization was fitted on.
    pub norm_scope: String,
    pub sections: SectionMap,
    pub threshold_kg: f64,
    pub weight_cap_kg: Option<f64>,
    pub sigma: f64,
    pub traffic_seed: u64,
    pub noise_seed: u64,
    pub window: usize,
    pub split: SplitSpec,
    pub sample_dt: f64,
    pub n_instants: usize,
    pub sensor_positions: Vec<f64>,
    pub positive_rate: f64,
    pub config_digest: Option<String>,
}

pub fn dataset_csv(data: &PreparedDataset) -> String {
    let n = data.n_sensors();
    let mut out = String::with_capacity(data.series.values.len() * 24);
    out.push_str("t_index");
    for i in 0..n {
        write!(out, ",sensor_{i}").expect("writing to a String");
    }
    out.push_str(",label\n");
    for (t, label) in data.labels.iter().enumerate() {
        write!(out, "{t}").expect("writing to a String");
        for v in data.series.row(t) {
            write!(out, ",{v:?}").expect("writing to a String");
        }
        writeln!(out, ",{label}").expect("writing to a String");
    }
    out
}

pub fn write_dataset(data: &PreparedDataset, meta: &DatasetMeta, csv_path: &Path, meta_path: &Path) -> Result<()> {
    write_atomic(csv_path, dataset_csv(data).as_bytes())?;
    write_json_atomic(meta_path, meta)
}

pub fn read_dataset(csv_path: &Path, meta_path: &Path) -> Result<(PreparedDataset, DatasetMeta)> {
    let meta: DatasetMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let width = reader.headers()?.len();
    let n = width.saturating_sub(2);
    if n == 0 || n != meta.sensor_positions.len() {
        return Err(Error::Invalid(format!(
            "dataset has {n} sensor columns, metadata lists {}",
            meta.sensor_positions.len()
        )));
    }
    let mut values = Vec::with_capacity(meta.n_instants * n);
    let mut labels = Vec::with_capacity(meta.n_instants);
    for (t, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Invalid(format!("row {t}: bad value {s:?}: {e}")))
        };
        for field in record.iter().skip(1).take(n) {
            values.push(parse(field)?);
        }
        let label = match &record[width - 1] {
            "0" => 0,
            "1" => 1,
            other => return Err(Error::Invalid(format!("row {t}: label {other:?} is not 0 or 1"))),
        };
        labels.push(label);
    }
    if labels.len() != meta.n_instants {
        return Err(Error::Invalid(format!(
            "dataset has {} rows, metadata says {}",
            labels.len(),
            meta.n_instants
        )));
    }
    let series = ResponseMatrix::new(values, n, meta.sample_dt, meta.sensor_positions.clone())?;
    let data = PreparedDataset {
        series,
        labels,
        window: meta.window,
        split: meta.split.clone(),
        norm: meta.norm.clone(),
    };
    if data.window == 0 || data.labels.len() < data.window {
        return Err(Error::Invalid("dataset is shorter than one window".into()));
    }
    data.split.validate(data.n_samples())?;
    Ok((data, meta))
}
