//! Vehicle classes and their mixed-lognormal gross weight distributions.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rejection attempts before a weight cap is declared unsatisfiable.
pub const WEIGHT_RETRY_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VehicleType {
    I,
    II,
    III,
    IV,
    V,
}

impl VehicleType {
    pub const ALL: [VehicleType; 5] = [
        VehicleType::I,
        VehicleType::II,
        VehicleType::III,
        VehicleType::IV,
        VehicleType::V,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// One lognormal term: `weight * LogNormal(mu, sigma)`, weights in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalComponent {
    pub weight: f64,
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTypeSpec {
    pub type_id: VehicleType,
    pub components: Vec<LognormalComponent>,
}

impl VehicleTypeSpec {
    /// Three-term spec where the last coefficient is `1 - w1 - w2`.
    pub fn three_term(type_id: VehicleType, first: (f64, f64, f64), second: (f64, f64, f64), third: (f64, f64)) -> Self {
        let (w1, mu1, s1) = first;
        let (w2, mu2, s2) = second;
        let (mu3, s3) = third;
        Self {
            type_id,
            components: vec![
                LognormalComponent { weight: w1, mu: mu1, sigma: s1 },
                LognormalComponent { weight: w2, mu: mu2, sigma: s2 },
                LognormalComponent { weight: 1.0 - w1 - w2, mu: mu3, sigma: s3 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::Config(format!("{:?}: no mixture components", self.type_id)));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{:?}: mixture coefficients sum to {total}",
                self.type_id
            )));
        }
        for c in &self.components {
            if c.weight < 0.0 || !(c.sigma > 0.0) || !c.mu.is_finite() || !c.sigma.is_finite() {
                return Err(Error::Config(format!("{:?}: invalid component {c:?}", self.type_id)));
            }
        }
        Ok(())
    }

    /// Analytic mean `sum w_i exp(mu_i + sigma_i^2 / 2)`.
    pub fn mean(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (c.mu + 0.5 * c.sigma * c.sigma).exp())
            .sum()
    }

    /// Analytic mixture CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let ln = x.ln();
        self.components
            .iter()
            .map(|c| c.weight * 0.5 * libm::erfc(-(ln - c.mu) / (c.sigma * SQRT_2)))
            .sum()
    }

    /// Uncapped draw: pick a component with probability `w_i`, then
    /// `exp(N(mu_i, sigma_i))`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("validated spec");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        (chosen.mu + chosen.sigma * z).exp()
    }
}

/// Draws a gross weight, redrawing the whole mixture while the result
/// exceeds `cap`.
pub fn sample_vehicle_weight<R: Rng + ?Sized>(spec: &VehicleTypeSpec, cap: Option<f64>, rng: &mut R) -> Result<f64> {
    let Some(cap) = cap else {
        return Ok(spec.sample(rng));
    };
    for _ in 0..WEIGHT_RETRY_LIMIT {
        let w = spec.sample(rng);
        if w <= cap {
            return Ok(w);
        }
    }
    Err(Error::Config(format!(
        "{:?}: no weight under the {cap} kg cap after {WEIGHT_RETRY_LIMIT} draws",
        spec.type_id
    )))
}

/// Mixture parameters fitted to toll-station records, one spec per class.
///
/// Values are taken as published, including the class V second component
/// (`mu = 16.05`) whose draws are removed by the weight cap in practice.
pub fn default_weight_specs() -> Vec<VehicleTypeSpec> {
    use VehicleType::*;
    vec![
        VehicleTypeSpec::three_term(I, (0.337, 4.970, 0.130), (0.545, 7.144, 0.211), (7.883, 0.373)),
        VehicleTypeSpec::three_term(II, (0.056, 8.010, 0.670), (0.065, 4.061, 0.060), (8.111, 0.543)),
        VehicleTypeSpec::three_term(III, (0.572, 9.067, 0.370), (0.293, 5.815, 0.006), (9.371, 0.100)),
        VehicleTypeSpec::three_term(IV, (0.134, 9.390, 0.385), (0.311, 9.345, 0.149), (4.936, 0.184)),
        VehicleTypeSpec::three_term(V, (0.558, 9.762, 0.256), (0.352, 16.050, 0.317), (10.690, 0.258)),
    ]
}
