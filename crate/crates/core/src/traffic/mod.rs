//! Random single-lane traffic: vehicle weight sampling and the cellular
//! automaton that moves vehicles across the bridge.

mod automaton;
pub mod io;
mod placement;
mod weights;

pub use automaton::{
    avg_vehicles_per_section, nasch_step, simulate, CaParams, IdSource, RoadState, StepEvents, TrafficTrajectory,
    Vehicle,
};
pub use placement::{loads_at, PlacedLoad, SamplingPlan};
pub use weights::{
    default_weight_specs, sample_vehicle_weight, LognormalComponent, VehicleType, VehicleTypeSpec,
    WEIGHT_RETRY_LIMIT,
};
