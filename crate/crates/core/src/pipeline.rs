//! Traffic, response and dataset stages chained for one preset.

use crate::dataset::{labels_for, prepare, PrepareParams, PreparedDataset, SectionMap};
use crate::error::Result;
use crate::presets::BridgePreset;
use crate::structure::{synthesize_with_plan, ResponseMatrix, StructuralModel};
use crate::traffic::{simulate, SamplingPlan, TrafficTrajectory};

/// Raw output of the traffic and structural stages.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: TrafficTrajectory,
    pub plan: SamplingPlan,
    pub response: ResponseMatrix,
}

/// Trajectory long enough for `preset.n_instants` samples.
pub fn simulate_traffic(preset: &BridgePreset, seed: u64) -> Result<TrafficTrajectory> {
    preset.validate()?;
    let params = crate::traffic::CaParams {
        seed,
        ..preset.traffic.clone()
    };
    let ticks = SamplingPlan::ticks_needed(preset.n_instants, preset.sample_dt, params.tick_duration);
    simulate(&params, ticks.max(1))
}

/// Response of `model` over the first `preset.n_instants` instants.
pub fn synthesize(preset: &BridgePreset, model: &StructuralModel, trajectory: &TrafficTrajectory) -> Result<(SamplingPlan, ResponseMatrix)> {
    let plan = SamplingPlan::new(trajectory, preset.sample_dt)?.limited(preset.n_instants);
    let response = synthesize_with_plan(trajectory, model, &plan)?;
    Ok((plan, response))
}

pub fn run_simulation(preset: &BridgePreset, seed: u64) -> Result<Simulation> {
    let trajectory = simulate_traffic(preset, seed)?;
    let model = preset.structural_model()?;
    let (plan, response) = synthesize(preset, &model, &trajectory)?;
    Ok(Simulation {
        trajectory,
        plan,
        response,
    })
}

impl Simulation {
    pub fn labels(&self, sections: &SectionMap) -> Vec<u8> {
        labels_for(&self.trajectory, &self.plan, sections)
    }

    pub fn dataset(&self, sections: &SectionMap, params: &PrepareParams) -> Result<PreparedDataset> {
        prepare(&self.response, &self.labels(sections), params)
    }
}
