//! Pipeline stages behind each subcommand.
//!
//! Upstream artifacts found in the input directory are reused when their
//! recorded digest matches the current configuration; otherwise the stage is
//! recomputed in memory.

use std::path::{Path, PathBuf};

use girder_core::dataset::{read_dataset, write_dataset, DatasetMeta, PreparedDataset};
use girder_core::evaluation::{
    case_study, neighbor_fp_study, noise_sweep, section_length_csv, section_length_study, section_study,
    total_weight_fp_study, Metrics, StudyMeta, StudyResult, StudySetup,
};
use girder_core::io_util::{digest_of, write_atomic, write_json_atomic};
use girder_core::models::{fit, TrainReport, TrainedModel};
use girder_core::pipeline::{simulate_traffic, synthesize, Simulation};
use girder_core::structure::{read_response, write_response, ResponseMeta};
use girder_core::traffic::io::{read_trajectory, write_trajectory, TrajectoryMeta};
use girder_core::traffic::{SamplingPlan, TrafficTrajectory};
use girder_core::{Error, Result};
use girder_neural::Checkpoint;
use serde::Serialize;

use crate::config::RunConfig;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAJECTORY_JSON: &str = "trajectory.json";
pub const RESPONSE_CSV: &str = "response.csv";
pub const RESPONSE_JSON: &str = "response.json";
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_JSON: &str = "dataset.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const METRICS: &str = "metrics.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Sections,
    Noise,
    NeighborFp,
    WeightFp,
    SectionLength,
}

impl StudyKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            StudyKind::Sections => "study_sections",
            StudyKind::Noise => "study_noise",
            StudyKind::NeighborFp => "study_neighbor_fp",
            StudyKind::WeightFp => "study_weight_fp",
            StudyKind::SectionLength => "study_section_length",
        }
    }
}

/// Where a command reads upstream artifacts and writes its own.
#[derive(Debug, Clone)]
pub struct Dirs {
    pub input: PathBuf,
    pub out: PathBuf,
}

impl Dirs {
    pub fn same(dir: impl Into<PathBuf>) -> Self {
        let dir = dir.into();
        Self {
            input: dir.clone(),
            out: dir,
        }
    }
}

/// Digest of everything that shapes the trajectory and the response.
pub fn traffic_digest(cfg: &RunConfig) -> Result<String> {
    digest_of(&serde_json::json!({ "seed": cfg.seed, "bridge": cfg.bridge }))
}

/// Digest of everything that shapes the prepared dataset.
pub fn dataset_digest(cfg: &RunConfig) -> Result<String> {
    digest_of(&serde_json::json!({
        "seed": cfg.seed,
        "bridge": cfg.bridge,
        "dataset": cfg.dataset,
        "window": cfg.model.window,
    }))
}

fn both_exist(a: &Path, b: &Path) -> bool {
    a.is_file() && b.is_file()
}

fn load_trajectory(cfg: &RunConfig, dir: &Path) -> Result<TrafficTrajectory> {
    let digest = traffic_digest(cfg)?;
    let (csv, json) = (dir.join(TRAJECTORY_CSV), dir.join(TRAJECTORY_JSON));
    if both_exist(&csv, &json) {
        let (traj, meta) = read_trajectory(&csv, &json)?;
        if meta.config_digest.as_deref() == Some(digest.as_str()) {
            log::info!("reusing {}", csv.display());
            return Ok(traj);
        }
        log::info!("{} was produced by another configuration; simulating", csv.display());
    }
    simulate_traffic(&cfg.bridge, cfg.seed)
}

/// Trajectory and response, reused from `dir` when possible.
pub fn load_simulation(cfg: &RunConfig, dir: &Path) -> Result<Simulation> {
    let trajectory = load_trajectory(cfg, dir)?;
    let digest = traffic_digest(cfg)?;
    let (csv, json) = (dir.join(RESPONSE_CSV), dir.join(RESPONSE_JSON));
    if both_exist(&csv, &json) {
        let (response, meta) = read_response(&csv, &json)?;
        if meta.config_digest.as_deref() == Some(digest.as_str()) {
            log::info!("reusing {}", csv.display());
            let plan = SamplingPlan::new(&trajectory, cfg.bridge.sample_dt)?.limited(cfg.bridge.n_instants);
            return Ok(Simulation {
                trajectory,
                plan,
                response,
            });
        }
    }
    let model = cfg.bridge.structural_model()?;
    let (plan, response) = synthesize(&cfg.bridge, &model, &trajectory)?;
    Ok(Simulation {
        trajectory,
        plan,
        response,
    })
}

fn build_dataset(cfg: &RunConfig, sim: &Simulation) -> Result<(PreparedDataset, DatasetMeta)> {
    let sections = cfg.bridge.sections(cfg.target())?;
    let data = sim.dataset(&sections, &cfg.prepare_params())?;
    let window = data.window;
    let meta = DatasetMeta {
        preset: cfg.bridge.name.clone(),
        response_model: "quasi-static".into(),
        norm: data.norm.clone(),
        norm_scope: format!("instants 0..{}", data.split.train.end + window - 1),
        threshold_kg: sections.threshold_kg,
        sections,
        weight_cap_kg: cfg.bridge.traffic.weight_cap,
        sigma: cfg.dataset.sigma,
        traffic_seed: cfg.seed,
        noise_seed: cfg.dataset.noise_seed,
        window,
        split: data.split.clone(),
        sample_dt: data.series.sample_dt,
        n_instants: data.labels.len(),
        sensor_positions: data.series.sensor_positions.clone(),
        positive_rate: data.positive_rate(),
        config_digest: Some(dataset_digest(cfg)?),
    };
    Ok((data, meta))
}

/// Prepared dataset, reused from `dir` when possible.
pub fn load_dataset(cfg: &RunConfig, dir: &Path) -> Result<(PreparedDataset, DatasetMeta)> {
    let digest = dataset_digest(cfg)?;
    let (csv, json) = (dir.join(DATASET_CSV), dir.join(DATASET_JSON));
    if both_exist(&csv, &json) {
        let (data, meta) = read_dataset(&csv, &json)?;
        if meta.config_digest.as_deref() == Some(digest.as_str()) {
            log::info!("reusing {}", csv.display());
            return Ok((data, meta));
        }
        log::info!("{} was produced by another configuration; rebuilding", csv.display());
    }
    build_dataset(cfg, &load_simulation(cfg, dir)?)
}

pub fn simulate(cfg: &RunConfig, dirs: &Dirs) -> Result<()> {
    let traj = simulate_traffic(&cfg.bridge, cfg.seed)?;
    let meta = TrajectoryMeta {
        params: girder_core::traffic::CaParams {
            seed: cfg.seed,
            ..cfg.bridge.traffic.clone()
        },
        seed: cfg.seed,
        tick_duration: cfg.bridge.traffic.tick_duration,
        n_ticks: traj.len(),
        config_digest: Some(traffic_digest(cfg)?),
    };
    write_trajectory(&traj, &meta, &dirs.out.join(TRAJECTORY_CSV), &dirs.out.join(TRAJECTORY_JSON))?;
    log::info!("{} ticks written", traj.len());
    Ok(())
}

pub fn synthesize_cmd(cfg: &RunConfig, dirs: &Dirs) -> Result<()> {
    let trajectory = load_trajectory(cfg, &dirs.input)?;
    let model = cfg.bridge.structural_model()?;
    let (_, response) = synthesize(&cfg.bridge, &model, &trajectory)?;
    let meta = ResponseMeta::describe(&cfg.bridge.name, &model, &response, Some(traffic_digest(cfg)?));
    write_response(&response, &meta, &dirs.out.join(RESPONSE_CSV), &dirs.out.join(RESPONSE_JSON))?;
    log::info!("{} instants x {} sensors written", response.n_instants(), response.n_sensors);
    Ok(())
}

pub fn build_dataset_cmd(cfg: &RunConfig, dirs: &Dirs) -> Result<()> {
    let sim = load_simulation(cfg, &dirs.input)?;
    let (data, meta) = build_dataset(cfg, &sim)?;
    write_dataset(&data, &meta, &dirs.out.join(DATASET_CSV), &dirs.out.join(DATASET_JSON))?;
    let [tr, va, te] = data.split.sizes();
    log::info!(
        "{} samples ({tr}/{va}/{te}), positive rate {:.4}",
        data.n_samples(),
        meta.positive_rate
    );
    Ok(())
}

fn train_on(cfg: &RunConfig, data: &PreparedDataset) -> Result<TrainedModel> {
    let train = data.samples(data.split.train.clone());
    let val = data.samples(data.split.val.clone());
    fit(&cfg.model, data.n_sensors(), &train, &val)
}

pub fn train(cfg: &RunConfig, dirs: &Dirs) -> Result<TrainReport> {
    let (data, meta) = load_dataset(cfg, &dirs.input)?;
    let model = train_on(cfg, &data)?;
    let ckpt = model.checkpoint(meta.config_digest.clone())?;
    write_atomic(&dirs.out.join(CHECKPOINT), ckpt.to_json()?.as_bytes())?;
    write_json_atomic(&dirs.out.join(TRAIN_REPORT), &model.report)?;
    log::info!(
        "best epoch {:?}, validation F1 {:?}, threshold {}, {:.1} s",
        model.report.best_epoch,
        model.report.f1_val,
        model.report.threshold,
        model.report.wall_time.as_secs_f64()
    );
    Ok(model.report)
}

fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Ok(Checkpoint::from_json(&std::fs::read_to_string(path)?)?)
}

/// Loads a checkpoint and checks it was trained on a dataset with `digest`.
fn load_model(path: &Path, digest: &Option<String>) -> Result<TrainedModel> {
    let (model, meta) = TrainedModel::from_checkpoint(&read_checkpoint(path)?)?;
    if &meta.config_digest != digest {
        return Err(Error::DigestMismatch {
            expected: digest.clone().unwrap_or_default(),
            found: meta.config_digest.unwrap_or_default(),
        });
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub approach: String,
    pub threshold: f64,
    pub test_samples: usize,
    pub metrics: Metrics,
    pub dataset_digest: Option<String>,
}

pub fn evaluate(cfg: &RunConfig, dirs: &Dirs, checkpoint: Option<&Path>) -> Result<EvaluationReport> {
    let (data, meta) = load_dataset(cfg, &dirs.input)?;
    let path = checkpoint.map_or_else(|| dirs.input.join(CHECKPOINT), Path::to_path_buf);
    let model = load_model(&path, &meta.config_digest)?;
    let test = data.samples(data.split.test.clone());
    let report = EvaluationReport {
        approach: model.network.config().approach.as_str().into(),
        threshold: model.threshold(),
        test_samples: test.len(),
        metrics: model.evaluate(&test)?,
        dataset_digest: meta.config_digest,
    };
    write_json_atomic(&dirs.out.join(METRICS), &report)?;
    log::info!("test F1 {:.4}", report.metrics.f1);
    Ok(report)
}

fn study_meta(cfg: &RunConfig) -> Result<StudyMeta> {
    Ok(StudyMeta {
        preset: cfg.bridge.name.clone(),
        traffic_seed: cfg.seed,
        noise_seed: cfg.dataset.noise_seed,
        model_seed: cfg.model.seed,
        config_digest: Some(cfg.digest()?),
        dataset_digest: Some(dataset_digest(cfg)?),
    })
}

/// Model for the false-positive analyses: the checkpoint in the input
/// directory if it matches the dataset, otherwise a fresh one.
fn fp_model(cfg: &RunConfig, dirs: &Dirs, data: &PreparedDataset, meta: &DatasetMeta) -> Result<TrainedModel> {
    let path = dirs.input.join(CHECKPOINT);
    if path.is_file() {
        match load_model(&path, &meta.config_digest) {
            Ok(m) => {
                log::info!("using {}", path.display());
                return Ok(m);
            }
            Err(Error::DigestMismatch { .. }) => log::info!("{} does not match; training", path.display()),
            Err(e) => return Err(e),
        }
    }
    train_on(cfg, data)
}

pub fn study(cfg: &RunConfig, dirs: &Dirs, kind: StudyKind) -> Result<()> {
    let sim = load_simulation(cfg, &dirs.input)?;
    let stem = kind.file_stem();
    let csv_path = dirs.out.join(format!("{stem}.csv"));
    let json_path = dirs.out.join(format!("{stem}.json"));
    let setup = StudySetup {
        prepare: cfg.prepare_params(),
        model: cfg.model.clone(),
        approaches: cfg.study.approaches.clone(),
    };
    let result: StudyResult = match kind {
        StudyKind::Sections => {
            let sections: Vec<usize> = cfg.study.sections.iter().map(|s| s - 1).collect();
            section_study(&cfg.bridge, &sim, &sections, &setup, study_meta(cfg)?)?
        }
        StudyKind::Noise => noise_sweep(&cfg.bridge, &sim, cfg.target(), &cfg.study.sigmas, &setup, study_meta(cfg)?)?,
        StudyKind::NeighborFp | StudyKind::WeightFp => {
            let (data, meta) = build_dataset(cfg, &sim)?;
            let model = fp_model(cfg, dirs, &data, &meta)?;
            let approach = model.network.config().approach;
            if kind == StudyKind::NeighborFp {
                let rates = neighbor_fp_study(&model, &data, &sim, &meta.sections)?;
                case_study("neighbor_fp", "neighbor_section", approach, &rates, study_meta(cfg)?)
            } else {
                let rates = total_weight_fp_study(&model, &data, &sim, &meta.sections, cfg.study.weight_bin_kg)?;
                case_study("weight_fp", "total_weight", approach, &rates, study_meta(cfg)?)
            }
        }
        StudyKind::SectionLength => {
            let rows = section_length_study(&sim, &cfg.study.section_lengths)?;
            write_atomic(&csv_path, section_length_csv(&rows).as_bytes())?;
            write_json_atomic(
                &json_path,
                &serde_json::json!({ "rows": rows, "meta": study_meta(cfg)? }),
            )?;
            return Ok(());
        }
    };
    for r in &result.rows {
        log::info!("{} {} {}: F1 {:.4}", result.axis, r.axis_value, r.approach, r.metrics.f1);
    }
    result.write(&csv_path, &json_path)
}
