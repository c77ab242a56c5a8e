//! Run configuration: a TOML file naming a bridge preset plus overrides.
//!
//! ```toml
//! preset = "sbm"          # "sbm", "cbm", or a path to a preset TOML file
//! seed = 7                # traffic seed
//!
//! [bridge]
//! n_instants = 2000
//!
//! [bridge.traffic]
//! p_inject = 0.4
//!
//! [dataset]
//! target_section = 2      # one-based
//! sigma = 0.1
//!
//! [model]
//! epochs = 10
//! ```
//!
//! Every table is merged key by key over the preset defaults; command-line
//! flags are applied last.

use std::path::{Path, PathBuf};

use girder_core::io_util::digest_of;
use girder_core::models::{Approach, ModelConfig};
use girder_core::presets::BridgePreset;
use girder_core::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// One-based target section.
    pub target_section: usize,
    pub sigma: f64,
    pub noise_seed: u64,
    pub ratios: [f64; 3],
    /// Count the split ratios apply to; the instant count when absent.
    pub split_basis: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// One-based sections for the per-section study.
    pub sections: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub approaches: Vec<Approach>,
    pub weight_bin_kg: f64,
    pub section_lengths: Vec<f64>,
}

/// Fully resolved configuration. Its digest identifies every artifact
/// produced from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: String,
    pub seed: u64,
    pub bridge: BridgePreset,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub study: StudyConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub section: Option<usize>,
}

impl RunConfig {
    /// Defaults for a named preset.
    pub fn for_preset(bridge: BridgePreset, preset: &str) -> Self {
        let cell = bridge.traffic.cell_length;
        let max_len = (bridge.beam.length / 2.0).min(20.0 * cell);
        let section_lengths = (1..)
            .map(|k| k as f64 * cell)
            .take_while(|&len| len <= max_len + 1e-9)
            .collect();
        Self {
            preset: preset.to_string(),
            seed: 1,
            dataset: DatasetConfig {
                target_section: bridge.default_target,
                sigma: 0.0,
                noise_seed: 2,
                ratios: [6.0, 2.0, 2.0],
                split_basis: None,
            },
            model: ModelConfig {
                seed: 3,
                ..ModelConfig::default()
            },
            study: StudyConfig {
                sections: bridge.study_sections.clone(),
                sigmas: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
                approaches: vec![Approach::Dovi, Approach::Lr, Approach::Mlp],
                weight_bin_kg: 10_000.0,
                section_lengths,
            },
            bridge,
        }
    }

    /// Reads `path` (if any), resolves its preset and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (mut table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let value: toml::Table =
                    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let json = serde_json::to_value(value)?;
                (json, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Value::Object(Default::default()), PathBuf::new()),
        };
        let obj = table.as_object_mut().expect("TOML documents are tables");
        let preset_name = match (&overrides.preset, obj.remove("preset")) {
            (Some(p), _) => p.clone(),
            (None, Some(Value::String(p))) => p,
            (None, Some(other)) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
            (None, None) => "sbm".to_string(),
        };
        let bridge = resolve_preset(&preset_name, &base_dir)?;
        let mut merged = serde_json::to_value(Self::for_preset(bridge, &preset_name))?;
        merge(&mut merged, table);
        let mut config: Self = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(sigma) = overrides.sigma {
            config.dataset.sigma = sigma;
        }
        if let Some(section) = overrides.section {
            config.dataset.target_section = section;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.bridge.validate()?;
        self.model.validate()?;
        let n = self.bridge.n_sections();
        let in_range = |s: usize| (1..=n).contains(&s);
        if !in_range(self.dataset.target_section) {
            return Err(Error::Config(format!(
                "target section {} is not among sections 1..={n}",
                self.dataset.target_section
            )));
        }
        if let Some(&bad) = self.study.sections.iter().find(|&&s| !in_range(s)) {
            return Err(Error::Config(format!("study section {bad} is not among sections 1..={n}")));
        }
        if !(self.dataset.sigma >= 0.0) || self.study.sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        if self.study.approaches.is_empty() {
            return Err(Error::Config("at least one approach is required".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> Result<String> {
        digest_of(self)
    }

    /// Zero-based target section.
    pub fn target(&self) -> usize {
        self.dataset.target_section - 1
    }

    pub fn prepare_params(&self) -> girder_core::dataset::PrepareParams {
        girder_core::dataset::PrepareParams {
            window: self.model.window,
            sigma: self.dataset.sigma,
            noise_seed: self.dataset.noise_seed,
            ratios: self.dataset.ratios,
            split_basis: self.dataset.split_basis,
        }
    }
}

fn resolve_preset(name: &str, base_dir: &Path) -> Result<BridgePreset> {
    match name {
        "sbm" | "cbm" => BridgePreset::by_name(name),
        path => {
            let full = base_dir.join(path);
            let text = std::fs::read_to_string(&full)
                .map_err(|e| Error::Config(format!("preset {path:?} is not sbm, cbm or a readable file: {e}")))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", full.display())))
        }
    }
}

/// Recursively overwrites `base` with `patch`; tables merge, everything else
/// replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
