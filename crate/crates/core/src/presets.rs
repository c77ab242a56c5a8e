//! Ready-made bridge scenarios: the 60 m simply supported beam and the
//! 705 m spring-supported continuous beam standing in for the cable-stayed
//! bridge.

use serde::{Deserialize, Serialize};

use crate::dataset::{SectionMap, OVERLOAD_THRESHOLD_KG};
use crate::error::{Error, Result};
use crate::structure::{BeamModel, BeamSegment, ResponseMethod, SensorLayout, StructuralModel, Support, SupportKind};
use crate::traffic::CaParams;

/// Vehicle class mix used by both presets, classes I..V.
pub const PRESET_TYPE_PROBS: [f64; 5] = [0.075, 0.075, 0.075, 0.075, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgePreset {
    pub name: String,
    pub traffic: CaParams,
    pub beam: BeamModel,
    pub method: ResponseMethod,
    pub section_length: f64,
    pub sample_dt: f64,
    pub n_instants: usize,
    pub threshold_kg: f64,
    /// One-based section monitored when none is requested.
    pub default_target: usize,
    /// One-based sections compared by the per-section study.
    pub study_sections: Vec<usize>,
}

impl BridgePreset {
    pub fn sbm() -> Self {
        let segment = BeamSegment {
            span: 60.0,
            e: 33e9,
            i: 0.28,
            rho: 2600.0,
            area: 0.94,
        };
        Self {
            name: "sbm".into(),
            traffic: CaParams {
                n_cells: 30,
                cell_length: 2.0,
                v_max: 4,
                p_inject: 0.5,
                type_probs: PRESET_TYPE_PROBS,
                ..CaParams::default()
            },
            beam: BeamModel::simply_supported(60.0, segment, 64),
            method: ResponseMethod::ClosedForm,
            section_length: 16.0,
            sample_dt: 0.5,
            n_instants: 100_000,
            threshold_kg: OVERLOAD_THRESHOLD_KG,
            default_target: 2,
            study_sections: vec![1, 2, 3, 4],
        }
    }

    pub fn cbm() -> Self {
        let length = 705.0;
        let mut supports = vec![
            Support {
                position: 0.0,
                kind: SupportKind::Pinned,
            },
            Support {
                position: length,
                kind: SupportKind::Pinned,
            },
        ];
        let spacing = 15.0;
        let mut x = spacing;
        while x < length - 1e-9 {
            supports.push(Support {
                position: x,
                kind: SupportKind::Spring { stiffness: 1e8 },
            });
            x += spacing;
        }
        Self {
            name: "cbm".into(),
            traffic: CaParams {
                n_cells: 141,
                cell_length: 5.0,
                v_max: 6,
                p_inject: 0.8,
                type_probs: PRESET_TYPE_PROBS,
                ..CaParams::default()
            },
            beam: BeamModel {
                length,
                segments: vec![BeamSegment {
                    span: length,
                    e: 200e9,
                    i: 2.5,
                    rho: 7850.0,
                    area: 1.72,
                }],
                supports,
                n_elements: 282,
            },
            method: ResponseMethod::FiniteElement,
            section_length: 50.0,
            sample_dt: 1.0,
            n_instants: 100_000,
            threshold_kg: OVERLOAD_THRESHOLD_KG,
            default_target: 14,
            study_sections: (1..=14).collect(),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "sbm" => Ok(Self::sbm()),
            "cbm" => Ok(Self::cbm()),
            other => Err(Error::Config(format!("unknown bridge preset {other:?} (expected sbm or cbm)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        self.beam.validate()?;
        let road = self.traffic.bridge_length();
        if (road - self.beam.length).abs() > 1e-9 * self.beam.length {
            return Err(Error::Config(format!(
                "road of {road} m does not match the {} m beam",
                self.beam.length
            )));
        }
        if !(self.sample_dt > 0.0) || self.n_instants == 0 {
            return Err(Error::Config("sampling interval and instant count must be positive".into()));
        }
        let n = self.n_sections();
        for &s in self.study_sections.iter().chain([&self.default_target]) {
            if s < 1 || s > n {
                return Err(Error::Config(format!("section {s} is not among sections 1..={n}")));
            }
        }
        self.sections(0)?;
        Ok(())
    }

    pub fn n_sections(&self) -> usize {
        (self.beam.length / self.section_length - 1e-9).ceil() as usize
    }

    /// Section map with zero-based `target`.
    pub fn sections(&self, target: usize) -> Result<SectionMap> {
        let map = SectionMap::uniform(self.beam.length, self.section_length, target, self.threshold_kg)?;
        map.validate(Some(self.traffic.cell_length))?;
        Ok(map)
    }

    pub fn sensors(&self) -> Result<SensorLayout> {
        Ok(SensorLayout::section_midpoints(&self.sections(0)?.bounds))
    }

    pub fn structural_model(&self) -> Result<StructuralModel> {
        StructuralModel::new(self.beam.clone(), self.sensors()?, self.method)
    }
}
