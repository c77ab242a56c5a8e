//! Quasi-static displacement at sensor positions under moving traffic.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::beam::{ss_influence, BeamModel, GRAVITY};
use super::fe::{FeBeam, FeSolution};
use crate::error::{Error, Result};
use crate::io_util::{write_atomic, write_json_atomic};
use crate::traffic::{loads_at, PlacedLoad, SamplingPlan, TrafficTrajectory};

/// Sensor coordinates along the bridge, one per girder section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    pub positions: Vec<f64>,
}

impl SensorLayout {
    /// One sensor at the midpoint of every section given by its boundaries
    /// `[x0, x1, ..., xn]`.
    pub fn section_midpoints(bounds: &[f64]) -> Self {
        Self {
            positions: bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseMethod {
    /// Closed-form simply supported influence function.
    ClosedForm,
    /// Influence lines from the finite-element beam.
    #[default]
    FiniteElement,
}

/// Beam plus sensors, with influence lines precomputed.
#[derive(Debug, Clone)]
pub struct StructuralModel {
    beam: BeamModel,
    sensors: SensorLayout,
    method: ResponseMethod,
    /// Deflected shape under a unit downward force at each sensor.
    influence: Vec<FeSolution>,
    mesh_elements: usize,
}

impl StructuralModel {
    pub fn new(beam: BeamModel, sensors: SensorLayout, method: ResponseMethod) -> Result<Self> {
        beam.validate()?;
        if sensors.is_empty() {
            return Err(Error::Config("at least one sensor is required".into()));
        }
        for &p in &sensors.positions {
            if !(0.0..=beam.length).contains(&p) {
                return Err(Error::Config(format!("sensor at {p} m is off the {} m beam", beam.length)));
            }
        }
        let (influence, mesh_elements) = match method {
            ResponseMethod::ClosedForm => {
                if !beam.is_simply_supported() {
                    return Err(Error::Config(
                        "closed-form response needs a single simply supported span".into(),
                    ));
                }
                (Vec::new(), 0)
            }
            ResponseMethod::FiniteElement => {
                let fe = FeBeam::assemble(&beam, &sensors.positions)?;
                let lines = sensors
                    .positions
                    .iter()
                    .map(|&s| fe.solve(&[(s, 1.0)]))
                    .collect::<Result<Vec<_>>>()?;
                (lines, fe.n_elements())
            }
        };
        Ok(Self {
            beam,
            sensors,
            method,
            influence,
            mesh_elements,
        })
    }

    pub fn beam(&self) -> &BeamModel {
        &self.beam
    }

    pub fn sensors(&self) -> &SensorLayout {
        &self.sensors
    }

    pub fn method(&self) -> ResponseMethod {
        self.method
    }

    /// Element count of the assembled mesh; 0 for the closed form.
    pub fn mesh_elements(&self) -> usize {
        self.mesh_elements
    }

    /// Deflection (m) at `sensor` per newton of downward force at `x`.
    /// Loads off the beam contribute nothing.
    pub fn unit_response(&self, sensor: usize, x: f64) -> f64 {
        if !(0.0..=self.beam.length).contains(&x) {
            return 0.0;
        }
        match self.method {
            ResponseMethod::ClosedForm => {
                let seg = &self.beam.segments[0];
                ss_influence(x, self.sensors.positions[sensor], 1.0, self.beam.length, seg.ei())
                    .expect("positions checked against the span")
            }
            ResponseMethod::FiniteElement => self.influence[sensor].deflection_at(x),
        }
    }

    /// Superposed sensor deflections for vehicles given in kilograms.
    pub fn respond(&self, loads: &[PlacedLoad], out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = loads
                .iter()
                .map(|l| l.weight_kg * GRAVITY * self.unit_response(i, l.position_m))
                .sum();
        }
    }
}

/// `T x n` displacement series, row-major, downward negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub values: Vec<f64>,
    pub n_sensors: usize,
    pub sample_dt: f64,
    pub sensor_positions: Vec<f64>,
}

impl ResponseMatrix {
    pub fn new(values: Vec<f64>, n_sensors: usize, sample_dt: f64, sensor_positions: Vec<f64>) -> Result<Self> {
        if n_sensors == 0 || values.len() % n_sensors != 0 {
            return Err(Error::Invalid(format!(
                "{} values do not fill rows of {n_sensors} sensors",
                values.len()
            )));
        }
        if sensor_positions.len() != n_sensors {
            return Err(Error::Invalid("one position per sensor column is required".into()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite response at flat index {bad}")));
        }
        Ok(Self {
            values,
            n_sensors,
            sample_dt,
            sensor_positions,
        })
    }

    pub fn n_instants(&self) -> usize {
        self.values.len() / self.n_sensors
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_sensors..(t + 1) * self.n_sensors]
    }

    pub fn get(&self, t: usize, sensor: usize) -> f64 {
        self.values[t * self.n_sensors + sensor]
    }

    pub fn column(&self, sensor: usize) -> Vec<f64> {
        self.values.iter().skip(sensor).step_by(self.n_sensors).copied().collect()
    }
}

fn check_lengths(traj: &TrafficTrajectory, model: &StructuralModel) -> Result<()> {
    if let (Some(n), Some(cl)) = (traj.n_cells(), traj.cell_length()) {
        let road = n as f64 * cl;
        let beam = model.beam.length;
        if (road - beam).abs() > 1e-9 * beam {
            return Err(Error::Config(format!(
                "trajectory covers {road} m but the bridge is {beam} m long"
            )));
        }
    }
    Ok(())
}

/// Responses at every instant the trajectory can cover at `sample_dt`.
pub fn synthesize_response(traj: &TrafficTrajectory, model: &StructuralModel, sample_dt: f64) -> Result<ResponseMatrix> {
    let plan = SamplingPlan::new(traj, sample_dt)?;
    synthesize_with_plan(traj, model, &plan)
}

/// Responses at the instants of `plan`.
pub fn synthesize_with_plan(
    traj: &TrafficTrajectory,
    model: &StructuralModel,
    plan: &SamplingPlan,
) -> Result<ResponseMatrix> {
    traj.validate()?;
    check_lengths(traj, model)?;
    let n = model.sensors.len();
    let mut values = vec![0.0; plan.n_instants * n];
    values.par_chunks_mut(n).enumerate().for_each(|(t, row)| {
        model.respond(&loads_at(traj, plan, t), row);
    });
    ResponseMatrix::new(values, n, plan.sample_dt, model.sensors.positions.clone())
}

/// Descriptive sidecar written next to a response CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMeta {
    pub preset: String,
    pub response_model: String,
    pub gravity: f64,
    /// Bending second moment used for each segment, m^4.
    pub inertia_m4: Vec<f64>,
    pub method: ResponseMethod,
    pub mesh_elements: usize,
    pub sample_dt: f64,
    pub n_instants: usize,
    pub sensor_positions: Vec<f64>,
    pub config_digest: Option<String>,
}

impl ResponseMeta {
    pub fn describe(preset: &str, model: &StructuralModel, resp: &ResponseMatrix, config_digest: Option<String>) -> Self {
        Self {
            preset: preset.to_string(),
            response_model: "quasi-static".into(),
            gravity: GRAVITY,
            inertia_m4: model.beam.segments.iter().map(|s| s.i).collect(),
            method: model.method,
            mesh_elements: model.mesh_elements,
            sample_dt: resp.sample_dt,
            n_instants: resp.n_instants(),
            sensor_positions: resp.sensor_positions.clone(),
            config_digest,
        }
    }
}

pub fn response_csv(resp: &ResponseMatrix) -> String {
    let mut out = String::with_capacity(resp.values.len() * 24);
    out.push_str("t_seconds");
    for i in 0..resp.n_sensors {
        write!(out, ",sensor_{i}").expect("writing to a String");
    }
    out.push('\n');
    for t in 0..resp.n_instants() {
        write!(out, "{:?}", t as f64 * resp.sample_dt).expect("writing to a String");
        for v in resp.row(t) {
            write!(out, ",{v:?}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn write_response(resp: &ResponseMatrix, meta: &ResponseMeta, csv_path: &Path, meta_path: &Path) -> Result<()> {
    write_atomic(csv_path, response_csv(resp).as_bytes())?;
    write_json_atomic(meta_path, meta)
}

pub fn read_response(csv_path: &Path, meta_path: &Path) -> Result<(ResponseMatrix, ResponseMeta)> {
    let meta: ResponseMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
    let mut reader = csv::Reader::from_path(csv_path)?;
    let n = reader.headers()?.len().saturating_sub(1);
    if n != meta.sensor_positions.len() {
        return Err(Error::Invalid(format!(
            "response file has {n} sensor columns, metadata lists {}",
            meta.sensor_positions.len()
        )));
    }
    let mut values = Vec::with_capacity(meta.n_instants * n);
    for record in reader.records() {
        let record = record?;
        for field in record.iter().skip(1) {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|e| Error::Invalid(format!("bad response value {field:?}: {e}")))?,
            );
        }
    }
    let resp = ResponseMatrix::new(values, n, meta.sample_dt, meta.sensor_positions.clone())?;
    Ok((resp, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::beam::{BeamSegment, Support, SupportKind};
    use crate::traffic::{RoadState, Vehicle, VehicleType};

    fn sbm_beam(n: usize) -> BeamModel {
        let seg = BeamSegment { span: 60.0, e: 33e9, i: 0.28, rho: 2600.0, area: 0.94 };
        BeamModel::simply_supported(60.0, seg, n)
    }

    fn sensors() -> SensorLayout {
        SensorLayout::section_midpoints(&[0.0, 16.0, 32.0, 48.0, 60.0])
    }

    fn vehicle(id: u64, position: u32, weight_kg: f64) -> Vehicle {
        Vehicle { id, type_id: VehicleType::V, weight_kg, velocity: 0, position }
    }

    fn static_traj(vehicles: Vec<Vehicle>, ticks: usize) -> TrafficTrajectory {
        let state = RoadState::from_vehicles(30, 2.0, vehicles).unwrap();
        TrafficTrajectory { states: vec![state; ticks], tick_duration: 1.0 }
    }

    #[test]
    fn midpoints_of_sections() {
        assert_eq!(sensors().positions, vec![8.0, 24.0, 40.0, 54.0]);
    }

    #[test]
    fn closed_form_and_fe_agree() {
        let cf = StructuralModel::new(sbm_beam(32), sensors(), ResponseMethod::ClosedForm).unwrap();
        let fe = StructuralModel::new(sbm_beam(32), sensors(), ResponseMethod::FiniteElement).unwrap();
        for s in 0..4 {
            for x in [0.0, 3.3, 17.0, 30.0, 41.1, 59.9, 60.0] {
                let a = cf.unit_response(s, x);
                let b = fe.unit_response(s, x);
                assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{s} {x}: {a} {b}");
            }
        }
    }

    #[test]
    fn empty_traffic_gives_zero_response() {
        let model = StructuralModel::new(sbm_beam(8), sensors(), ResponseMethod::ClosedForm).unwrap();
        let resp = synthesize_response(&static_traj(vec![], 4), &model, 0.5).unwrap();
        assert_eq!(resp.n_instants(), 7);
        assert!(resp.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn static_vehicle_gives_constant_column() {
        let single = SensorLayout { positions: vec![31.0] };
        let model = StructuralModel::new(sbm_beam(8), single, ResponseMethod::ClosedForm).unwrap();
        let resp = synthesize_response(&static_traj(vec![vehicle(1, 15, 30_000.0)], 5), &model, 0.5).unwrap();
        let expected = ss_influence(31.0, 31.0, 30_000.0 * GRAVITY, 60.0, 33e9 * 0.28).unwrap();
        for v in resp.column(0) {
            assert_eq!(v, expected);
        }
    }

    #[test]
    fn superposition_of_vehicles() {
        let model = StructuralModel::new(sbm_beam(16), sensors(), ResponseMethod::FiniteElement).unwrap();
        let a = static_traj(vec![vehicle(1, 4, 12_000.0)], 3);
        let b = static_traj(vec![vehicle(2, 21, 41_000.0)], 3);
        let ab = static_traj(vec![vehicle(1, 4, 12_000.0), vehicle(2, 21, 41_000.0)], 3);
        let ra = synthesize_response(&a, &model, 1.0).unwrap();
        let rb = synthesize_response(&b, &model, 1.0).unwrap();
        let rab = synthesize_response(&ab, &model, 1.0).unwrap();
        for k in 0..rab.values.len() {
            let sum = ra.values[k] + rb.values[k];
            assert!((rab.values[k] - sum).abs() <= 1e-10 * sum.abs());
        }
    }

    #[test]
    fn reciprocity_on_a_spring_supported_beam() {
        let seg = BeamSegment { span: 90.0, e: 200e9, i: 2.5, rho: 7850.0, area: 1.72 };
        let mut supports = vec![
            Support { position: 0.0, kind: SupportKind::Pinned },
            Support { position: 90.0, kind: SupportKind::Pinned },
        ];
        for x in [15.0, 30.0, 45.0, 60.0, 75.0] {
            supports.push(Support { position: x, kind: SupportKind::Spring { stiffness: 1e8 } });
        }
        let beam = BeamModel { length: 90.0, segments: vec![seg], supports, n_elements: 36 };
        let points = vec![7.0, 22.5, 51.0, 83.0];
        let model = StructuralModel::new(beam, SensorLayout { positions: points.clone() }, ResponseMethod::FiniteElement)
            .unwrap();
        for (i, &a) in points.iter().enumerate() {
            for (j, &b) in points.iter().enumerate() {
                let ab = model.unit_response(i, b);
                let ba = model.unit_response(j, a);
                assert!((ab - ba).abs() <= 1e-9 * ab.abs().max(ba.abs()), "{a} {b}");
            }
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let model = StructuralModel::new(sbm_beam(8), sensors(), ResponseMethod::ClosedForm).unwrap();
        let state = RoadState::from_vehicles(20, 2.0, vec![]).unwrap();
        let traj = TrafficTrajectory { states: vec![state], tick_duration: 1.0 };
        assert!(synthesize_response(&traj, &model, 1.0).is_err());
    }

    #[test]
    fn closed_form_needs_simple_support() {
        let mut beam = sbm_beam(8);
        beam.supports[1].position = 50.0;
        assert!(StructuralModel::new(beam, sensors(), ResponseMethod::ClosedForm).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let model = StructuralModel::new(sbm_beam(8), sensors(), ResponseMethod::FiniteElement).unwrap();
        let traj = static_traj(vec![vehicle(1, 9, 33_333.3), vehicle(2, 22, 7_777.7)], 3);
        let resp = synthesize_response(&traj, &model, 0.5).unwrap();
        let meta = ResponseMeta::describe("sbm", &model, &resp, Some("abc".into()));
        let dir = tempfile::tempdir().unwrap();
        let (c, m) = (dir.path().join("r.csv"), dir.path().join("r.json"));
        write_response(&resp, &meta, &c, &m).unwrap();
        let (back, meta_back) = read_response(&c, &m).unwrap();
        assert_eq!(back, resp);
        assert_eq!(meta_back, meta);
    }
}
