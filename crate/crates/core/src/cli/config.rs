//! TOML run configuration.
//!
//! ```toml
//! input = "scene.ply"
//! output = "out"
//! seed = 0
//!
//! [fill]
//! radius = 0.05
//!
//! [sim]
//! frames = 150
//!
//! [bgdo]
//! iterations = 2
//!
//! [[materials]]
//! label = 0
//! preset = "jelly"
//! young = 3e4
//! ```
//!
//! Every table is optional except `materials`; unknown keys are rejected.

use crate::bgdo::BgdoConfig;
use crate::constitutive::{Elasticity, MaterialParams, Plasticity, Preset};
use crate::ipf::FillParams;
use crate::mpm::{MaterialSet, SimConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// One `[[materials]]` entry. With `preset` every field is optional and
/// overrides the preset value; without it `elasticity`, `plasticity`,
/// `density`, `poisson` and `young` are required.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub label: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elasticity: Option<Elasticity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plasticity: Option<Plasticity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub young: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yield_stress: Option<f64>,
    /// Degrees.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub friction_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cohesion: Option<f64>,
}

impl MaterialEntry {
    pub fn new(label: i32) -> Self {
        Self {
            label,
            preset: None,
            elasticity: None,
            plasticity: None,
            density: None,
            poisson: None,
            young: None,
            yield_stress: None,
            friction_angle: None,
            cohesion: None,
        }
    }

    pub fn resolve(&self) -> Result<MaterialParams, ConfigError> {
        let label = self.label;
        let missing =
            |what: &str| ConfigError::Invalid(format!("material {label}: `{what}` is required without a preset"));
        let mut m = match self.preset {
            Some(p) => p.material(label),
            None => MaterialParams::new(
                label,
                self.elasticity.ok_or_else(|| missing("elasticity"))?,
                self.plasticity.ok_or_else(|| missing("plasticity"))?,
                self.density.ok_or_else(|| missing("density"))?,
                self.poisson.ok_or_else(|| missing("poisson"))?,
                self.young.ok_or_else(|| missing("young"))?,
            ),
        };
        if let Some(v) = self.elasticity {
            m.elasticity = v;
        }
        if let Some(v) = self.plasticity {
            m.plasticity = v;
        }
        if let Some(v) = self.density {
            m.density = v;
        }
        if let Some(v) = self.poisson {
            m.poisson = v;
        }
        if let Some(v) = self.young {
            m.young = v;
        }
        if let Some(v) = self.yield_stress {
            m.yield_stress = v;
        }
        if let Some(v) = self.friction_angle {
            m.friction_angle = v;
        }
        if let Some(v) = self.cohesion {
            m.cohesion = v;
        }
        Ok(m)
    }

    /// Fully explicit entry for `m`.
    pub fn from_params(m: &MaterialParams) -> Self {
        Self {
            label: m.label,
            preset: None,
            elasticity: Some(m.elasticity),
            plasticity: Some(m.plasticity),
            density: Some(m.density),
            poisson: Some(m.poisson),
            young: Some(m.young),
            yield_stress: Some(m.yield_stress),
            friction_angle: Some(m.friction_angle),
            cohesion: Some(m.cohesion),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BgdoSection {
    pub iterations: usize,
    pub delta_target: f64,
    /// Calibration frames; first, middle and last when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_frames: Option<Vec<usize>>,
    pub resimulate_between_iterations: bool,
}

impl Default for BgdoSection {
    fn default() -> Self {
        let b = BgdoConfig::default();
        Self {
            iterations: b.iterations,
            delta_target: b.delta_target,
            snapshot_frames: None,
            resimulate_between_iterations: false,
        }
    }
}

impl BgdoSection {
    pub fn update_config(&self) -> BgdoConfig {
        BgdoConfig { iterations: self.iterations, delta_target: self.delta_target }
    }
}

fn default_true() -> bool {
    true
}

fn default_extent() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Rescale the input so its largest extent is `extent` and its centroid
    /// sits at the domain center.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default = "default_extent")]
    pub extent: f64,
    #[serde(default)]
    pub fill: FillParams,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub bgdo: BgdoSection,
    #[serde(default)]
    pub materials: Vec<MaterialEntry>,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
            seed: 0,
            normalize: true,
            extent: default_extent(),
            fill: FillParams::default(),
            sim: SimConfig::default(),
            bgdo: BgdoSection::default(),
            materials: Vec::new(),
        }
    }

    /// Range checks owned by every module, plus the material table.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.fill.validate().map_err(|e| inv(&e))?;
        self.sim.validate().map_err(|e| inv(&e))?;
        if !(self.extent > 0.0 && self.extent <= 1.0) {
            return Err(ConfigError::Invalid(format!("extent must be in (0, 1], got {}", self.extent)));
        }
        if !(self.bgdo.delta_target >= 0.0 && self.bgdo.delta_target.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "delta_target must be non-negative, got {}",
                self.bgdo.delta_target
            )));
        }
        if let Some(frames) = &self.bgdo.snapshot_frames {
            if frames.is_empty() {
                return Err(ConfigError::Invalid("snapshot_frames must not be empty".into()));
            }
            if let Some(&f) = frames.iter().find(|&&f| f >= self.sim.frames) {
                return Err(ConfigError::Invalid(format!("snapshot frame {f} is outside 0..{}", self.sim.frames)));
            }
        }
        self.material_set()?;
        Ok(())
    }

    pub fn material_set(&self) -> Result<MaterialSet, ConfigError> {
        let params = self.materials.iter().map(|m| m.resolve()).collect::<Result<Vec<_>, _>>()?;
        MaterialSet::new(params).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<PipelineConfig, ConfigError> {
    let cfg: PipelineConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates a config. Relative `input`/`output` paths are taken
/// relative to the config file.
pub fn parse_config(path: &Path) -> Result<PipelineConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut cfg = parse_config_str(&text, path)?;
    if let Some(dir) = path.parent() {
        if cfg.input.is_relative() {
            cfg.input = dir.join(&cfg.input);
        }
        if cfg.output.is_relative() {
            cfg.output = dir.join(&cfg.output);
        }
    }
    log::info!("resolved config:\n{}", cfg.to_toml());
    Ok(cfg)
}
