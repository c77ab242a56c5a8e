//! Vehicle positions at sampling instants finer than (or equal to) the
//! automaton tick, by linear interpolation between consecutive states.

use super::automaton::{RoadState, TrafficTrajectory};
use crate::error::{Error, Result};

/// A vehicle reduced to a point mass at a longitudinal coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedLoad {
    pub vehicle_id: u64,
    pub weight_kg: f64,
    pub position_m: f64,
}

/// How sampling instants map onto automaton ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub sample_dt: f64,
    pub tick_duration: f64,
    pub n_instants: usize,
}

impl SamplingPlan {
    /// Requires `sample_dt` to divide the tick duration or be an integer
    /// multiple of it. Every instant must fall inside the trajectory.
    pub fn new(traj: &TrafficTrajectory, sample_dt: f64) -> Result<Self> {
        let tick = traj.tick_duration;
        if !(sample_dt > 0.0) || !(tick > 0.0) {
            return Err(Error::Invalid("sampling interval and tick must be positive".into()));
        }
        let ratio = if sample_dt <= tick { tick / sample_dt } else { sample_dt / tick };
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::Invalid(format!(
                "sampling interval {sample_dt} s is incompatible with the {tick} s tick"
            )));
        }
        if traj.is_empty() {
            return Ok(Self {
                sample_dt,
                tick_duration: tick,
                n_instants: 0,
            });
        }
        let span = (traj.len() - 1) as f64 * tick;
        let n_instants = (span / sample_dt + 1e-9).floor() as usize + 1;
        Ok(Self {
            sample_dt,
            tick_duration: tick,
            n_instants,
        })
    }

    /// Keeps at most the first `n` instants.
    pub fn limited(mut self, n: usize) -> Self {
        self.n_instants = self.n_instants.min(n);
        self
    }

    /// Tick index and fractional progress toward the next tick.
    pub fn locate(&self, instant: usize) -> (usize, f64) {
        let pos = instant as f64 * self.sample_dt / self.tick_duration;
        let tick = (pos + 1e-9).floor();
        let frac = pos - tick;
        (tick as usize, if frac < 1e-9 { 0.0 } else { frac })
    }

    /// Number of ticks a trajectory needs to cover `n_instants`.
    pub fn ticks_needed(n_instants: usize, sample_dt: f64, tick_duration: f64) -> usize {
        if n_instants == 0 {
            return 0;
        }
        (((n_instants - 1) as f64 * sample_dt / tick_duration) - 1e-9).ceil().max(0.0) as usize + 1
    }
}

/// Loads on (or just leaving) the road at a sampling instant. Vehicles are
/// placed at cell centres; between ticks a vehicle is interpolated toward its
/// next cell, and a vehicle that leaves during the interval is carried past
/// the bridge end.
pub fn loads_at(traj: &TrafficTrajectory, plan: &SamplingPlan, instant: usize) -> Vec<PlacedLoad> {
    let (tick, frac) = plan.locate(instant);
    let state = &traj.states[tick];
    if frac == 0.0 {
        return state
            .vehicles()
            .iter()
            .map(|v| PlacedLoad {
                vehicle_id: v.id,
                weight_kg: v.weight_kg,
                position_m: state.cell_center(v.position),
            })
            .collect();
    }
    let next = &traj.states[tick + 1];
    state
        .vehicles()
        .iter()
        .map(|v| {
            let from = state.cell_center(v.position);
            let to = match next.vehicles().iter().find(|w| w.id == v.id) {
                Some(w) => next.cell_center(w.position),
                None => exit_position(state, v.position, v.velocity),
            };
            PlacedLoad {
                vehicle_id: v.id,
                weight_kg: v.weight_kg,
                position_m: from + frac * (to - from),
            }
        })
        .collect()
}

fn exit_position(state: &RoadState, cell: u32, velocity: u32) -> f64 {
    let cells = velocity.max(state.n_cells - cell);
    state.cell_center(cell + cells)
}
