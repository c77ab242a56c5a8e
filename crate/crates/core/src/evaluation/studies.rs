//! Experiment protocols: per-section comparison, noise sweep, multi-vehicle
//! false-positive analyses and the section-length survey.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use crate::dataset::{section_load, PrepareParams, PreparedDataset, SectionMap};
use crate::error::{Error, Result};
use crate::io_util::{write_atomic, write_json_atomic};
use crate::models::{fit, predict_label, Approach, ModelConfig, TrainReport, TrainedModel};
use crate::pipeline::Simulation;
use crate::presets::BridgePreset;
use crate::traffic::{avg_vehicles_per_section, loads_at};

pub const STUDY_CSV_HEADER: &str = "axis_value,approach,precision,recall,f1,tp,fp,fn,tn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub axis_value: String,
    pub approach: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyMeta {
    pub preset: String,
    pub traffic_seed: u64,
    pub noise_seed: u64,
    pub model_seed: u64,
    pub config_digest: Option<String>,
    pub dataset_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub study: String,
    pub axis: String,
    pub rows: Vec<StudyRow>,
    pub meta: StudyMeta,
    /// Study-specific summary (case counts, rates, training reports).
    pub summary: serde_json::Value,
}

impl StudyResult {
    pub fn row(&self, axis_value: &str, approach: Approach) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.axis_value == axis_value && r.approach == approach.as_str())
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:?}"));
        let mut out = String::from(STUDY_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            writeln!(
                out,
                "{},{},{},{},{:?},{},{},{},{}",
                r.axis_value,
                r.approach,
                opt(m.precision),
                opt(m.recall),
                m.f1,
                m.tp,
                m.fp,
                m.fn_,
                m.tn
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        write_atomic(csv_path, self.to_csv().as_bytes())?;
        write_json_atomic(json_path, self)
    }
}

/// Dataset and model settings shared by every job of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySetup {
    pub prepare: PrepareParams,
    pub model: ModelConfig,
    pub approaches: Vec<Approach>,
}

/// Outcome of one train-and-test job.
#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub approach: Approach,
    pub model: TrainedModel,
    pub test: Metrics,
}

/// Trains `approach` on the split of `data` and scores its test range.
pub fn run_job(data: &PreparedDataset, base: &ModelConfig, approach: Approach) -> Result<JobOutcome> {
    let config = ModelConfig {
        approach,
        window: data.window,
        ..base.clone()
    };
    let train = data.samples(data.split.train.clone());
    let val = data.samples(data.split.val.clone());
    let test = data.samples(data.split.test.clone());
    let model = fit(&config, data.n_sensors(), &train, &val)?;
    let metrics = model.evaluate(&test)?;
    Ok(JobOutcome {
        approach,
        model,
        test: metrics,
    })
}

fn reports_summary(entries: &[(String, Approach, &TrainReport)]) -> serde_json::Value {
    serde_json::Value::Array(
        entries
            .iter()
            .map(|(axis, approach, report)| {
                serde_json::json!({
                    "axis_value": axis,
                    "approach": approach.as_str(),
                    "best_epoch": report.best_epoch,
                    "threshold": report.threshold,
                    "f1_val": report.f1_val,
                })
            })
            .collect(),
    )
}

/// Trains and tests every approach on every listed (zero-based) target
/// section. Axis values are one-based section numbers.
pub fn section_study(
    preset: &BridgePreset,
    sim: &Simulation,
    sections: &[usize],
    setup: &StudySetup,
    meta: StudyMeta,
) -> Result<StudyResult> {
    let jobs: Vec<(usize, Approach)> = sections
        .iter()
        .flat_map(|&s| setup.approaches.iter().map(move |&a| (s, a)))
        .collect();
    let datasets = sections
        .iter()
        .map(|&s| Ok((s, sim.dataset(&preset.sections(s)?, &setup.prepare)?)))
        .collect::<Result<Vec<_>>>()?;
    let outcomes = jobs
        .par_iter()
        .map(|&(s, a)| {
            let data = &datasets.iter().find(|(t, _)| *t == s).expect("dataset built").1;
            run_job(data, &setup.model, a).map(|o| (s, o))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = outcomes
        .iter()
        .map(|(s, o)| StudyRow {
            axis_value: (s + 1).to_string(),
            approach: o.approach.as_str().into(),
            metrics: o.test,
        })
        .collect();
    let reports: Vec<_> = outcomes
        .iter()
        .map(|(s, o)| ((s + 1).to_string(), o.approach, &o.model.report))
        .collect();
    Ok(StudyResult {
        study: "sections".into(),
        axis: "section".into(),
        rows,
        meta,
        summary: serde_json::json!({ "reports": reports_summary(&reports) }),
    })
}

/// Reruns dataset preparation, training and testing for every noise level
/// on one (zero-based) target section.
pub fn noise_sweep(
    preset: &BridgePreset,
    sim: &Simulation,
    target: usize,
    sigmas: &[f64],
    setup: &StudySetup,
    meta: StudyMeta,
) -> Result<StudyResult> {
    let sections = preset.sections(target)?;
    let labels = sim.labels(&sections);
    let datasets = sigmas
        .iter()
        .map(|&sigma| {
            let params = PrepareParams {
                sigma,
                ..setup.prepare.clone()
            };
            crate::dataset::prepare(&sim.response, &labels, &params)
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Approach)> = (0..sigmas.len())
        .flat_map(|i| setup.approaches.iter().map(move |&a| (i, a)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(i, a)| run_job(&datasets[i], &setup.model, a).map(|o| (i, o)))
        .collect::<Result<Vec<_>>>()?;
    let rows = outcomes
        .iter()
        .map(|(i, o)| StudyRow {
            axis_value: format!("{:?}", sigmas[*i]),
            approach: o.approach.as_str().into(),
            metrics: o.test,
        })
        .collect();
    let reports: Vec<_> = outcomes
        .iter()
        .map(|(i, o)| (format!("{:?}", sigmas[*i]), o.approach, &o.model.report))
        .collect();
    Ok(StudyResult {
        study: "noise".into(),
        axis: "sigma".into(),
        rows,
        meta,
        summary: serde_json::json!({
            "target_section": target + 1,
            "reports": reports_summary(&reports),
        }),
    })
}

/// False positives among a selected set of test instants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRate {
    pub label: String,
    pub cases: usize,
    pub false_positives: usize,
    /// `None` when there are no cases.
    pub rate: Option<f64>,
}

impl CaseRate {
    fn new(label: impl Into<String>, cases: usize, false_positives: usize) -> Self {
        Self {
            label: label.into(),
            cases,
            false_positives,
            rate: (cases > 0).then(|| false_positives as f64 / cases as f64),
        }
    }

    fn metrics(&self) -> Metrics {
        Metrics::from_counts(0, self.false_positives, 0, self.cases - self.false_positives)
    }
}

/// Test samples whose last instant satisfies `select`, with the model's
/// predictions. `select` sees the loads on the bridge at that instant.
fn select_cases<F>(
    model: &TrainedModel,
    data: &PreparedDataset,
    sim: &Simulation,
    mut select: F,
) -> Result<Vec<(usize, u8)>>
where
    F: FnMut(&[crate::traffic::PlacedLoad]) -> Option<usize>,
{
    if sim.plan.n_instants != data.labels.len() {
        return Err(Error::Invalid(format!(
            "trajectory covers {} instants, dataset has {}",
            sim.plan.n_instants,
            data.labels.len()
        )));
    }
    let mut picked = Vec::new();
    let mut samples = Vec::new();
    for k in data.split.test.clone() {
        let sample = data.sample(k);
        if let Some(group) = select(&loads_at(&sim.trajectory, &sim.plan, sample.end_instant)) {
            picked.push(group);
            samples.push(sample);
        }
    }
    let scores = model.network.score_samples(&samples)?;
    Ok(picked
        .into_iter()
        .zip(scores)
        .map(|(g, s)| (g, predict_label(s, model.threshold())))
        .collect())
}

/// Instants with no overloaded vehicle on the target but at least one on an
/// adjacent section, and how often the model still fires. Reported overall
/// and per neighbor (one-based section numbers; an instant with overloads on
/// both neighbors counts once overall and once for each).
pub fn neighbor_fp_study(
    model: &TrainedModel,
    data: &PreparedDataset,
    sim: &Simulation,
    sections: &SectionMap,
) -> Result<Vec<CaseRate>> {
    let target = sections.target;
    let neighbors: Vec<usize> = [target.checked_sub(1), Some(target + 1)]
        .into_iter()
        .flatten()
        .filter(|&s| s < sections.n_sections())
        .collect();
    // Bit i of the group marks an overload on neighbors[i].
    let cases = select_cases(model, data, sim, |loads| {
        if section_load(loads, sections, target).overloaded > 0 {
            return None;
        }
        let mask = neighbors
            .iter()
            .enumerate()
            .filter(|(_, &s)| section_load(loads, sections, s).overloaded > 0)
            .fold(0usize, |m, (i, _)| m | (1 << i));
        (mask != 0).then_some(mask)
    })?;
    let count = |pred: &dyn Fn(usize) -> bool| {
        let hits: Vec<_> = cases.iter().filter(|(g, _)| pred(*g)).collect();
        (hits.len(), hits.iter().filter(|(_, p)| *p == 1).count())
    };
    let (n, fp) = count(&|_| true);
    let mut out = vec![CaseRate::new("any", n, fp)];
    for (i, &s) in neighbors.iter().enumerate() {
        let (n, fp) = count(&|g| g & (1 << i) != 0);
        out.push(CaseRate::new((s + 1).to_string(), n, fp));
    }
    Ok(out)
}

/// Instants with no individual overload on the target but a total load on
/// it above the threshold, binned by total weight in `bin_kg` steps from the
/// threshold. The first entry is the overall rate; empty bins are omitted.
pub fn total_weight_fp_study(
    model: &TrainedModel,
    data: &PreparedDataset,
    sim: &Simulation,
    sections: &SectionMap,
    bin_kg: f64,
) -> Result<Vec<CaseRate>> {
    if !(bin_kg > 0.0) {
        return Err(Error::Config("weight bin width must be positive".into()));
    }
    let threshold = sections.threshold_kg;
    let cases = select_cases(model, data, sim, |loads| {
        let load = section_load(loads, sections, sections.target);
        (load.overloaded == 0 && load.total_kg > threshold)
            .then(|| ((load.total_kg - threshold) / bin_kg).floor() as usize)
    })?;
    let total_fp = cases.iter().filter(|(_, p)| *p == 1).count();
    let mut out = vec![CaseRate::new("any", cases.len(), total_fp)];
    let max_bin = cases.iter().map(|(b, _)| *b).max();
    for bin in 0..=max_bin.unwrap_or(0) {
        let hits: Vec<_> = cases.iter().filter(|(b, _)| *b == bin).collect();
        if hits.is_empty() {
            continue;
        }
        let lo = (threshold + bin as f64 * bin_kg) / 1000.0;
        let hi = lo + bin_kg / 1000.0;
        let fp = hits.iter().filter(|(_, p)| *p == 1).count();
        out.push(CaseRate::new(format!("{lo}-{hi}t"), hits.len(), fp));
    }
    Ok(out)
}

/// Wraps case rates as a study table (`tp` and `fn` are zero because every
/// selected instant is a negative).
pub fn case_study(study: &str, axis: &str, approach: Approach, rates: &[CaseRate], meta: StudyMeta) -> StudyResult {
    StudyResult {
        study: study.into(),
        axis: axis.into(),
        rows: rates
            .iter()
            .map(|r| StudyRow {
                axis_value: r.label.clone(),
                approach: approach.as_str().into(),
                metrics: r.metrics(),
            })
            .collect(),
        meta,
        summary: serde_json::to_value(rates).expect("case rates serialize"),
    }
}

/// Average vehicles per section for each candidate section length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionLengthRow {
    pub section_length_m: f64,
    pub avg_vehicles: f64,
}

pub fn section_length_study(sim: &Simulation, lengths: &[f64]) -> Result<Vec<SectionLengthRow>> {
    lengths
        .iter()
        .map(|&len| {
            Ok(SectionLengthRow {
                section_length_m: len,
                avg_vehicles: avg_vehicles_per_section(&sim.trajectory, len)?,
            })
        })
        .collect()
}

pub fn section_length_csv(rows: &[SectionLengthRow]) -> String {
    let mut out = String::from("section_length_m,avg_vehicles\n");
    for r in rows {
        writeln!(out, "{:?},{:?}", r.section_length_m, r.avg_vehicles).expect("writing to a String");
    }
    out
}
