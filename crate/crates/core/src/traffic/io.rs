//! Trajectory CSV (`tick,cell_index,vehicle_id,type_id,weight_kg,velocity`,
//! one row per occupied cell) with a JSON metadata sidecar.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::automaton::{CaParams, RoadState, TrafficTrajectory, Vehicle};
use super::weights::VehicleType;
use crate::error::{Error, Result};
use crate::io_util::{write_atomic, write_json_atomic};

pub const TRAJECTORY_HEADER: &str = "tick,cell_index,vehicle_id,type_id,weight_kg,velocity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub params: CaParams,
    pub seed: u64,
    pub tick_duration: f64,
    pub n_ticks: usize,
    pub config_digest: Option<String>,
}

pub fn trajectory_csv(traj: &TrafficTrajectory) -> String {
    let mut out = String::with_capacity(traj.len() * 64);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for (tick, state) in traj.states.iter().enumerate() {
        for v in state.vehicles() {
            writeln!(
                out,
                "{tick},{},{},{},{:?},{}",
                v.position,
                v.id,
                v.type_id.index() + 1,
                v.weight_kg,
                v.velocity
            )
            .expect("writing to a String");
        }
    }
    out
}

pub fn write_trajectory(traj: &TrafficTrajectory, meta: &TrajectoryMeta, csv_path: &Path, meta_path: &Path) -> Result<()> {
    write_atomic(csv_path, trajectory_csv(traj).as_bytes())?;
    write_json_atomic(meta_path, meta)
}

#[derive(Debug, Deserialize)]
struct Row {
    tick: usize,
    cell_index: u32,
    vehicle_id: u64,
    type_id: usize,
    weight_kg: f64,
    velocity: u32,
}

pub fn read_trajectory(csv_path: &Path, meta_path: &Path) -> Result<(TrafficTrajectory, TrajectoryMeta)> {
    let meta: TrajectoryMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
    let mut per_tick: Vec<Vec<Vehicle>> = vec![Vec::new(); meta.n_ticks];
    let mut reader = csv::Reader::from_path(csv_path)?;
    for row in reader.deserialize() {
        let row: Row = row?;
        let type_id = row
            .type_id
            .checked_sub(1)
            .and_then(VehicleType::from_index)
            .ok_or_else(|| Error::Invalid(format!("unknown vehicle type {}", row.type_id)))?;
        let slot = per_tick
            .get_mut(row.tick)
            .ok_or_else(|| Error::Invalid(format!("tick {} beyond {} ticks", row.tick, meta.n_ticks)))?;
        slot.push(Vehicle {
            id: row.vehicle_id,
            type_id,
            weight_kg: row.weight_kg,
            velocity: row.velocity,
            position: row.cell_index,
        });
    }
    let states = per_tick
        .into_iter()
        .map(|vehicles| RoadState::from_vehicles(meta.params.n_cells, meta.params.cell_length, vehicles))
        .collect::<Result<Vec<_>>>()?;
    let traj = TrafficTrajectory {
        states,
        tick_duration: meta.tick_duration,
    };
    traj.validate()?;
    Ok((traj, meta))
}
