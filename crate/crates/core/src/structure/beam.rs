//! Beam description and the closed-form simply supported influence function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gravitational acceleration used to turn vehicle mass into force.
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSegment {
    /// Length of this segment, m.
    pub span: f64,
    /// Young's modulus, Pa.
    pub e: f64,
    /// Second moment of area for vertical bending, m^4.
    pub i: f64,
    /// Density, kg/m^3.
    pub rho: f64,
    /// Cross-section area, m^2.
    pub area: f64,
}

impl BeamSegment {
    pub fn ei(&self) -> f64 {
        self.e * self.i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportKind {
    Pinned,
    /// Vertical spring, N/m.
    Spring { stiffness: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub position: f64,
    #[serde(flatten)]
    pub kind: SupportKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamModel {
    pub length: f64,
    /// Consecutive segments from x = 0; spans must add up to `length`.
    pub segments: Vec<BeamSegment>,
    pub supports: Vec<Support>,
    /// Uniform element count before support and segment breakpoints are
    /// inserted.
    pub n_elements: usize,
}

impl BeamModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::Config("beam length must be positive".into()));
        }
        if self.supports.len() < 2 {
            return Err(Error::Config("a beam needs at least two supports".into()));
        }
        if self.segments.is_empty() {
            return Err(Error::Config("a beam needs at least one segment".into()));
        }
        let spans: f64 = self.segments.iter().map(|s| s.span).sum();
        if (spans - self.length).abs() > 1e-9 * self.length {
            return Err(Error::Config(format!(
                "segment spans add to {spans} m, beam is {} m",
                self.length
            )));
        }
        for s in &self.segments {
            if !(s.span > 0.0) || !(s.ei() > 0.0) {
                return Err(Error::Config(format!("segment {s:?} needs positive span and EI")));
            }
        }
        for s in &self.supports {
            if !(0.0..=self.length).contains(&s.position) {
                return Err(Error::Config(format!("support at {} m is off the beam", s.position)));
            }
            if let SupportKind::Spring { stiffness } = s.kind {
                if !(stiffness > 0.0) {
                    return Err(Error::Config(format!("spring at {} m needs positive stiffness", s.position)));
                }
            }
        }
        if self.n_elements < 2 {
            return Err(Error::Config("mesh needs at least two elements".into()));
        }
        Ok(())
    }

    /// Single-span beam pinned at both ends.
    pub fn simply_supported(length: f64, segment: BeamSegment, n_elements: usize) -> Self {
        Self {
            length,
            segments: vec![BeamSegment { span: length, ..segment }],
            supports: vec![
                Support {
                    position: 0.0,
                    kind: SupportKind::Pinned,
                },
                Support {
                    position: length,
                    kind: SupportKind::Pinned,
                },
            ],
            n_elements,
        }
    }

    /// Segment covering `x`; the right end belongs to the last segment.
    pub fn segment_at(&self, x: f64) -> &BeamSegment {
        let mut start = 0.0;
        for s in &self.segments {
            if x < start + s.span {
                return s;
            }
            start += s.span;
        }
        self.segments.last().expect("validated beam has segments")
    }

    /// True for one uniform span pinned at exactly its two ends.
    pub fn is_simply_supported(&self) -> bool {
        self.segments.len() == 1
            && self.supports.len() == 2
            && self.supports.iter().all(|s| s.kind == SupportKind::Pinned)
            && self.supports.iter().any(|s| s.position == 0.0)
            && self.supports.iter().any(|s| s.position == self.length)
    }
}

/// Deflection at `sensor_pos` of a simply supported span `length` under a
/// downward point force `force` (N) at `load_pos`. Downward is negative.
pub fn ss_influence(load_pos: f64, sensor_pos: f64, force: f64, length: f64, ei: f64) -> Result<f64> {
    if !(ei > 0.0) || !(length > 0.0) {
        return Err(Error::Invalid("span and EI must be positive".into()));
    }
    if !(0.0..=length).contains(&load_pos) || !(0.0..=length).contains(&sensor_pos) {
        return Err(Error::Invalid(format!(
            "positions {load_pos} m / {sensor_pos} m outside the {length} m span"
        )));
    }
    Ok(-ss_magnitude(load_pos, sensor_pos, force, length, ei))
}

pub(crate) fn ss_magnitude(a: f64, x: f64, force: f64, length: f64, ei: f64) -> f64 {
    let b = length - a;
    if x <= a {
        force * b * x * (length * length - b * b - x * x) / (6.0 * length * ei)
    } else {
        let xr = length - x;
        force * a * xr * (length * length - a * a - xr * xr) / (6.0 * length * ei)
    }
}
