//! Girder sections and the overload labeling rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{loads_at, PlacedLoad, RoadState, SamplingPlan, TrafficTrajectory};

/// Default overload threshold, kg.
pub const OVERLOAD_THRESHOLD_KG: f64 = 30_000.0;

/// Partition of the bridge into consecutive sections plus the monitored one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMap {
    /// `[0, x1, ..., L]`; section `i` spans `[bounds[i], bounds[i + 1])`.
    pub bounds: Vec<f64>,
    /// Zero-based index of the target section.
    pub target: usize,
    pub threshold_kg: f64,
}

impl SectionMap {
    /// Equal sections of `section_length` from x = 0; the last one takes the
    /// remainder.
    pub fn uniform(length: f64, section_length: f64, target: usize, threshold_kg: f64) -> Result<Self> {
        if !(section_length > 0.0) || !(length > 0.0) {
            return Err(Error::Config("section and bridge lengths must be positive".into()));
        }
        let mut bounds = vec![0.0];
        let mut x = section_length;
        while x < length - 1e-9 * length {
            bounds.push(x);
            x += section_length;
        }
        bounds.push(length);
        let map = Self { bounds, target, threshold_kg };
        map.validate(None)?;
        Ok(map)
    }

    /// Checks tiling, target and, when given, that every boundary falls on a
    /// cell edge.
    pub fn validate(&self, cell_length: Option<f64>) -> Result<()> {
        if self.bounds.len() < 2 || self.bounds[0] != 0.0 {
            return Err(Error::Config("sections must start at x = 0".into()));
        }
        if self.bounds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("section boundaries must increase".into()));
        }
        if self.target >= self.n_sections() {
            return Err(Error::Config(format!(
                "target section {} does not exist ({} sections)",
                self.target + 1,
                self.n_sections()
            )));
        }
        if !(self.threshold_kg > 0.0) {
            return Err(Error::Config("overload threshold must be positive".into()));
        }
        if let Some(cl) = cell_length {
            for &b in &self.bounds {
                let r = b / cl;
                if (r - r.round()).abs() > 1e-9 * r.abs().max(1.0) {
                    return Err(Error::Config(format!("section boundary {b} m is not on a {cl} m cell edge")));
                }
            }
        }
        Ok(())
    }

    pub fn n_sections(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.bounds.last().expect("validated map")
    }

    pub fn with_target(&self, target: usize) -> Result<Self> {
        let map = Self { target, ..self.clone() };
        map.validate(None)?;
        Ok(map)
    }

    /// Section holding `x`, if it is on the bridge. The far end belongs to
    /// the last section.
    pub fn section_of(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0) || x > self.length() {
            return None;
        }
        let i = self.bounds.partition_point(|&b| b <= x);
        Some(i.clamp(1, self.n_sections()) - 1)
    }
}

/// What sits on one section at one instant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SectionLoad {
    pub count: usize,
    pub overloaded: usize,
    pub total_kg: f64,
}

pub fn section_load(loads: &[PlacedLoad], sections: &SectionMap, section: usize) -> SectionLoad {
    let mut out = SectionLoad::default();
    for l in loads {
        if sections.section_of(l.position_m) == Some(section) {
            out.count += 1;
            out.total_kg += l.weight_kg;
            if l.weight_kg >= sections.threshold_kg {
                out.overloaded += 1;
            }
        }
    }
    out
}

/// 1 iff one vehicle at or above the threshold is on the target section.
pub fn label_loads(loads: &[PlacedLoad], sections: &SectionMap) -> u8 {
    u8::from(section_load(loads, sections, sections.target).overloaded > 0)
}

/// Label of a road state, vehicles placed at their cell centres.
pub fn label_at(state: &RoadState, sections: &SectionMap) -> u8 {
    let loads: Vec<PlacedLoad> = state
        .vehicles()
        .iter()
        .map(|v| PlacedLoad {
            vehicle_id: v.id,
            weight_kg: v.weight_kg,
            position_m: state.cell_center(v.position),
        })
        .collect();
    label_loads(&loads, sections)
}

/// Labels at every instant of `plan`, using the same interpolated positions
/// as the response synthesis.
pub fn labels_for(traj: &TrafficTrajectory, plan: &SamplingPlan, sections: &SectionMap) -> Vec<u8> {
    (0..plan.n_instants)
        .map(|t| label_loads(&loads_at(traj, plan, t), sections))
        .collect()
}

/// Per-instant load on one section.
pub fn section_loads_for(
    traj: &TrafficTrajectory,
    plan: &SamplingPlan,
    sections: &SectionMap,
    section: usize,
) -> Vec<SectionLoad> {
    (0..plan.n_instants)
        .map(|t| section_load(&loads_at(traj, plan, t), sections, section))
        .collect()
}
