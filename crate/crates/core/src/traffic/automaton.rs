//! One-way single-lane Nagel–Schreckenberg automaton with open boundaries.
//!
//! Vehicles enter at cell 0 with zero velocity and leave once they move past
//! the last cell. Each update applies, in parallel over all vehicles:
//! accelerate by one up to `v_max`, brake to the gap ahead, slow down by one
//! with probability `p_slow`, advance.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::weights::{default_weight_specs, sample_vehicle_weight, VehicleType, VehicleTypeSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: u64,
    pub type_id: VehicleType,
    pub weight_kg: f64,
    /// Cells per tick.
    pub velocity: u32,
    /// Cell index.
    pub position: u32,
}

/// Road occupancy. Only occupied cells are stored, ordered by position.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadState {
    pub n_cells: u32,
    pub cell_length: f64,
    vehicles: Vec<Vehicle>,
}

impl RoadState {
    pub fn empty(n_cells: u32, cell_length: f64) -> Self {
        Self {
            n_cells,
            cell_length,
            vehicles: Vec::new(),
        }
    }

    /// Builds a state from vehicles in any order; rejects shared cells and
    /// out-of-range positions.
    pub fn from_vehicles(n_cells: u32, cell_length: f64, mut vehicles: Vec<Vehicle>) -> Result<Self> {
        vehicles.sort_by_key(|v| v.position);
        for pair in vehicles.windows(2) {
            if pair[0].position == pair[1].position {
                return Err(Error::Invalid(format!("two vehicles in cell {}", pair[0].position)));
            }
        }
        if let Some(v) = vehicles.last() {
            if v.position >= n_cells {
                return Err(Error::Invalid(format!("vehicle at cell {} beyond {n_cells} cells", v.position)));
            }
        }
        Ok(Self {
            n_cells,
            cell_length,
            vehicles,
        })
    }

    /// Occupied cells in ascending position order.
    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn cell(&self, index: u32) -> Option<&Vehicle> {
        self.vehicles
            .binary_search_by_key(&index, |v| v.position)
            .ok()
            .map(|i| &self.vehicles[i])
    }

    pub fn length_m(&self) -> f64 {
        self.n_cells as f64 * self.cell_length
    }

    /// Longitudinal coordinate of a cell centre.
    pub fn cell_center(&self, index: u32) -> f64 {
        (index as f64 + 0.5) * self.cell_length
    }
}

/// Automaton and arrival parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaParams {
    pub n_cells: u32,
    pub cell_length: f64,
    pub v_max: u32,
    pub p_slow: f64,
    pub p_inject: f64,
    /// Probability of each vehicle class for a new arrival, classes I..V.
    pub type_probs: [f64; 5],
    /// Upper bound on gross weight in kg; `None` disables resampling.
    pub weight_cap: Option<f64>,
    pub seed: u64,
    /// Updates discarded before recording so the road is not empty at t = 0.
    pub warmup_ticks: usize,
    pub tick_duration: f64,
    pub weight_specs: Vec<VehicleTypeSpec>,
}

impl Default for CaParams {
    fn default() -> Self {
        Self {
            n_cells: 30,
            cell_length: 2.0,
            v_max: 4,
            p_slow: 0.3,
            p_inject: 0.3,
            type_probs: [0.2; 5],
            weight_cap: Some(60_000.0),
            seed: 0,
            warmup_ticks: 200,
            tick_duration: 1.0,
            weight_specs: default_weight_specs(),
        }
    }
}

impl CaParams {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability")))
            }
        };
        prob("p_slow", self.p_slow)?;
        prob("p_inject", self.p_inject)?;
        for (i, &p) in self.type_probs.iter().enumerate() {
            prob(&format!("type_probs[{i}]"), p)?;
        }
        let total: f64 = self.type_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("type_probs sum to {total}")));
        }
        if self.v_max < 1 {
            return Err(Error::Config("v_max must be at least 1".into()));
        }
        if self.n_cells < 1 || !(self.cell_length > 0.0) {
            return Err(Error::Config("road needs at least one cell of positive length".into()));
        }
        if !(self.tick_duration > 0.0) {
            return Err(Error::Config("tick_duration must be positive".into()));
        }
        if let Some(cap) = self.weight_cap {
            if !(cap > 0.0) {
                return Err(Error::Config(format!("weight cap {cap} must be positive")));
            }
        }
        if self.weight_specs.len() != 5 {
            return Err(Error::Config("one weight spec per vehicle class is required".into()));
        }
        for (i, spec) in self.weight_specs.iter().enumerate() {
            if spec.type_id.index() != i {
                return Err(Error::Config(format!("weight spec {i} is for {:?}", spec.type_id)));
            }
            spec.validate()?;
        }
        Ok(())
    }

    pub fn bridge_length(&self) -> f64 {
        self.n_cells as f64 * self.cell_length
    }
}

/// What happened during one update besides the moves.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepEvents {
    pub injected: Option<u64>,
    pub exited: Vec<u64>,
}

/// Source of fresh vehicle ids for one simulation.
#[derive(Debug, Clone, Default)]
pub struct IdSource(u64);

impl IdSource {
    pub fn starting_at(next: u64) -> Self {
        Self(next)
    }

    fn next(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

/// Advances the road by one tick.
pub fn nasch_step<R: Rng + ?Sized>(
    state: &RoadState,
    params: &CaParams,
    ids: &mut IdSource,
    rng: &mut R,
) -> Result<(RoadState, StepEvents)> {
    let mut events = StepEvents::default();
    let old = &state.vehicles;
    let mut moved = Vec::with_capacity(old.len() + 1);
    for (i, v) in old.iter().enumerate() {
        let gap = old
            .get(i + 1)
            .map_or(u32::MAX, |lead| lead.position - v.position - 1);
        let mut speed = (v.velocity + 1).min(params.v_max).min(gap);
        if rng.random::<f64>() < params.p_slow {
            speed = speed.saturating_sub(1);
        }
        let position = v.position + speed;
        if position >= state.n_cells {
            events.exited.push(v.id);
        } else {
            moved.push(Vehicle {
                velocity: speed,
                position,
                ..v.clone()
            });
        }
    }

    let entry_free = moved.first().is_none_or(|v| v.position > 0);
    if entry_free && rng.random::<f64>() < params.p_inject {
        let type_id = draw_type(&params.type_probs, rng);
        let weight_kg = sample_vehicle_weight(&params.weight_specs[type_id.index()], params.weight_cap, rng)?;
        let id = ids.next();
        moved.insert(
            0,
            Vehicle {
                id,
                type_id,
                weight_kg,
                velocity: 0,
                position: 0,
            },
        );
        events.injected = Some(id);
    }

    Ok((
        RoadState {
            n_cells: state.n_cells,
            cell_length: state.cell_length,
            vehicles: moved,
        },
        events,
    ))
}

fn draw_type<R: Rng + ?Sized>(probs: &[f64; 5], rng: &mut R) -> VehicleType {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return VehicleType::ALL[i];
        }
    }
    // rounding in the cumulative sum; fall back to the last class with mass
    let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(4);
    VehicleType::ALL[last]
}

/// Time-ordered road states sampled once per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrajectory {
    pub states: Vec<RoadState>,
    pub tick_duration: f64,
}

impl TrafficTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_cells(&self) -> Option<u32> {
        self.states.first().map(|s| s.n_cells)
    }

    pub fn cell_length(&self) -> Option<f64> {
        self.states.first().map(|s| s.cell_length)
    }

    /// Checks that every state shares the road geometry and holds each
    /// vehicle at most once.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.states.first() else {
            return Ok(());
        };
        for (t, s) in self.states.iter().enumerate() {
            if s.n_cells != first.n_cells || s.cell_length != first.cell_length {
                return Err(Error::Invalid(format!("state {t} has a different road geometry")));
            }
            let mut ids: Vec<u64> = s.vehicles.iter().map(|v| v.id).collect();
            ids.sort_unstable();
            if ids.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invalid(format!("state {t} repeats a vehicle id")));
            }
            if s.vehicles.windows(2).any(|w| w[0].position >= w[1].position) {
                return Err(Error::Invalid(format!("state {t} is not ordered by cell")));
            }
        }
        Ok(())
    }
}

/// Runs the automaton from an empty road for `warmup_ticks + n_ticks`
/// updates and records the last `n_ticks` states.
pub fn simulate(params: &CaParams, n_ticks: usize) -> Result<TrafficTrajectory> {
    params.validate()?;
    if n_ticks == 0 {
        return Err(Error::Invalid("n_ticks must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ids = IdSource::default();
    let mut state = RoadState::empty(params.n_cells, params.cell_length);
    for _ in 0..params.warmup_ticks {
        state = nasch_step(&state, params, &mut ids, &mut rng)?.0;
    }
    let mut states = Vec::with_capacity(n_ticks);
    states.push(state);
    while states.len() < n_ticks {
        let next = nasch_step(states.last().expect("nonempty"), params, &mut ids, &mut rng)?.0;
        states.push(next);
    }
    Ok(TrafficTrajectory {
        states,
        tick_duration: params.tick_duration,
    })
}

/// Mean number of vehicles per girder section, averaged over time and over
/// the sections tiling the bridge (the last one may be shorter).
pub fn avg_vehicles_per_section(traj: &TrafficTrajectory, section_length: f64) -> Result<f64> {
    let (Some(n_cells), Some(cell_length)) = (traj.n_cells(), traj.cell_length()) else {
        return Ok(0.0);
    };
    let ratio = section_length / cell_length;
    if !(section_length > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 1.0 {
        return Err(Error::Invalid(format!(
            "section length {section_length} m is not a positive multiple of the {cell_length} m cell"
        )));
    }
    let cells_per_section = ratio.round() as u32;
    let n_sections = n_cells.div_ceil(cells_per_section);
    let total: usize = traj.states.iter().map(RoadState::len).sum();
    Ok(total as f64 / (traj.len() as f64 * n_sections as f64))
}
