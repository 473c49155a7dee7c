//! MLS-MPM solver on the unit cube.
//!
//! One substep is P2G (mass, momentum and the fused stress term), a grid
//! update (external acceleration and boundary band), then G2P (velocity,
//! affine matrix, position, deformation gradient, plastic projection).

mod grid;
mod kernel;
mod sim;
mod transfer;

pub use grid::Grid;
pub use kernel::{stencil, Stencil};
pub use sim::{resolve_timestep, simulate, SimOptions, SimOutput, Solver, TimeStep};
pub use transfer::{g2p, p2g, MaterialTable, ParticleView};

use crate::constitutive::{ConstitutiveError, MaterialParams};
use crate::{Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpmError {
    #[error("particle {particle} at {position:?} left the valid grid band")]
    OutOfDomain { particle: usize, position: [f64; 3] },
    #[error("particle {particle} inverted: det(F) = {det:e}")]
    Inverted { particle: usize, det: f64 },
    #[error("no material for label {0}")]
    MissingMaterial(i32),
    #[error(transparent)]
    Material(#[from] ConstitutiveError),
    #[error("time step {dt:e} exceeds the CFL limit {limit:e} (v_max = {v_max:.4e})")]
    Cfl { dt: f64, limit: f64, v_max: f64 },
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("frame {frame}, substep {substep}: {source}")]
    At { frame: usize, substep: usize, source: Box<MpmError> },
}

impl MpmError {
    /// Particle index carried by the error, if any.
    pub fn particle(&self) -> Option<usize> {
        match self {
            MpmError::OutOfDomain { particle, .. } | MpmError::Inverted { particle, .. } => Some(*particle),
            MpmError::At { source, .. } => source.particle(),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero velocity inside the band.
    Sticky,
    /// Zero normal velocity inside the band.
    #[default]
    Slip,
}

/// Boundary kind per face of the unit cube. +z is up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Boundaries {
    pub x_min: Boundary,
    pub x_max: Boundary,
    pub y_min: Boundary,
    pub y_max: Boundary,
    pub z_min: Boundary,
    pub z_max: Boundary,
}

impl Default for Boundaries {
    fn default() -> Self {
        Self {
            x_min: Boundary::Slip,
            x_max: Boundary::Slip,
            y_min: Boundary::Slip,
            y_max: Boundary::Slip,
            z_min: Boundary::Sticky,
            z_max: Boundary::Slip,
        }
    }
}

impl Boundaries {
    pub fn all(kind: Boundary) -> Self {
        Self { x_min: kind, x_max: kind, y_min: kind, y_max: kind, z_min: kind, z_max: kind }
    }

    pub fn lower(&self, axis: usize) -> Boundary {
        [self.x_min, self.y_min, self.z_min][axis]
    }

    pub fn upper(&self, axis: usize) -> Boundary {
        [self.x_max, self.y_max, self.z_max][axis]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Everything on the calling thread.
    #[default]
    Deterministic,
    /// Per-particle stress evaluation and G2P on the rayon pool. Grid
    /// accumulation stays serial, so results are bit-identical to
    /// `Deterministic`.
    Parallel,
}

/// Uniform acceleration applied to the grid for `start <= t < end` seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccelWindow {
    pub start: f64,
    pub end: f64,
    pub accel: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Cells per axis.
    pub grid: usize,
    pub frames: usize,
    /// Seconds per frame.
    pub frame_dt: f64,
    /// Fixed substep length; derived from the CFL guard when unset.
    pub dt: Option<f64>,
    /// Fixed substep count per frame; derived when unset.
    pub substeps: Option<usize>,
    /// Fraction of `dx / v_max` used when the step is derived.
    pub cfl: f64,
    pub gravity: [f64; 3],
    pub boundaries: Boundaries,
    /// Boundary band thickness in cells.
    pub margin: usize,
    pub mode: ExecMode,
    pub accelerations: Vec<AccelWindow>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            frames: 150,
            frame_dt: 1.0 / 25.0,
            dt: None,
            substeps: None,
            cfl: 0.4,
            gravity: [0.0, 0.0, -9.8],
            boundaries: Boundaries::default(),
            margin: 3,
            mode: ExecMode::Deterministic,
            accelerations: Vec::new(),
        }
    }
}

/// Largest `dt · v_max / dx` accepted by validation.
pub const CFL_LIMIT: f64 = 0.5;

impl SimConfig {
    pub fn dx(&self) -> f64 {
        1.0 / self.grid as f64
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }

    /// External acceleration at time `t`.
    pub fn acceleration_at(&self, t: f64) -> Vec3 {
        let mut a = self.gravity();
        for w in &self.accelerations {
            if t >= w.start && t < w.end {
                a += Vec3::from(w.accel);
            }
        }
        a
    }

    pub fn validate(&self) -> Result<(), MpmError> {
        let bad = |m: String| Err(MpmError::Config(m));
        if self.grid < 8 {
            return bad(format!("grid must be at least 8, got {}", self.grid));
        }
        if 2 * self.margin + 4 > self.grid {
            return bad(format!("margin {} leaves no interior on a {} grid", self.margin, self.grid));
        }
        if self.margin < 1 {
            return bad("margin must be at least 1 cell".into());
        }
        if !(self.frame_dt > 0.0 && self.frame_dt.is_finite()) {
            return bad(format!("frame_dt must be positive, got {}", self.frame_dt));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if self.substeps == Some(0) {
            return bad("substeps must be at least 1".into());
        }
        if !(self.cfl > 0.0 && self.cfl <= CFL_LIMIT) {
            return bad(format!("cfl must be in (0, {CFL_LIMIT}], got {}", self.cfl));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return bad("gravity must be finite".into());
        }
        for w in &self.accelerations {
            if !(w.end >= w.start) || w.accel.iter().any(|a| !a.is_finite()) {
                return bad(format!("bad acceleration window {w:?}"));
            }
        }
        Ok(())
    }
}

/// Per-particle constants, shared between the live state and snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleAttrs {
    pub mass: Vec<f64>,
    pub vol0: Vec<f64>,
    pub label: Vec<i32>,
}

/// Particle state; all arrays are index-aligned.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleState {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub c: Vec<Mat3>,
    pub f: Vec<Mat3>,
    pub attrs: Arc<ParticleAttrs>,
}

impl ParticleState {
    /// Particles at rest with `F = I`, `V₀ = (dx/2)³` and `m = ρ V₀` using the
    /// density of each particle's material.
    pub fn seed(positions: &[Vec3], labels: &[i32], materials: &MaterialSet, grid: usize) -> Result<Self, MpmError> {
        if positions.len() != labels.len() {
            return Err(MpmError::Config(format!("{} positions but {} labels", positions.len(), labels.len())));
        }
        let vol = (0.5 / grid as f64).powi(3);
        let mut mass = Vec::with_capacity(labels.len());
        for &l in labels {
            let m = materials.get(l).ok_or(MpmError::MissingMaterial(l))?;
            mass.push(m.density * vol);
        }
        let n = positions.len();
        Ok(Self {
            x: positions.to_vec(),
            v: vec![Vec3::zeros(); n],
            c: vec![Mat3::zeros(); n],
            f: vec![Mat3::identity(); n],
            attrs: Arc::new(ParticleAttrs { mass, vol0: vec![vol; n], label: labels.to_vec() }),
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn labels(&self) -> &[i32] {
        &self.attrs.label
    }

    pub fn view(&self) -> ParticleView<'_> {
        ParticleView { x: &self.x, v: &self.v, c: &self.c, f: &self.f, attrs: &self.attrs }
    }

    pub fn total_mass(&self) -> f64 {
        self.attrs.mass.iter().sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.v.iter().zip(&self.attrs.mass).map(|(v, m)| v * *m).sum()
    }

    /// Deep copy of the evolving fields at `frame`.
    pub fn snapshot(&self, frame: usize) -> FrameSnapshot {
        FrameSnapshot {
            frame,
            x: self.x.clone(),
            v: self.v.clone(),
            c: self.c.clone(),
            f: self.f.clone(),
            attrs: Arc::clone(&self.attrs),
        }
    }

    /// Bytes of the evolving per-particle fields.
    pub fn dynamic_bytes(&self) -> usize {
        self.len() * (2 * std::mem::size_of::<Vec3>() + 2 * std::mem::size_of::<Mat3>())
    }
}

/// `{x, v, C, F}` captured at the entry of a frame. The per-particle constants
/// (mass, volume, label) are shared with the run that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSnapshot {
    pub frame: usize,
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub c: Vec<Mat3>,
    pub f: Vec<Mat3>,
    pub attrs: Arc<ParticleAttrs>,
}

impl FrameSnapshot {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn labels(&self) -> &[i32] {
        &self.attrs.label
    }

    pub fn view(&self) -> ParticleView<'_> {
        ParticleView { x: &self.x, v: &self.v, c: &self.c, f: &self.f, attrs: &self.attrs }
    }

    /// Bytes of the copied fields.
    pub fn byte_size(&self) -> usize {
        self.len() * (2 * std::mem::size_of::<Vec3>() + 2 * std::mem::size_of::<Mat3>())
    }

    pub fn to_state(&self) -> ParticleState {
        ParticleState {
            x: self.x.clone(),
            v: self.v.clone(),
            c: self.c.clone(),
            f: self.f.clone(),
            attrs: Arc::clone(&self.attrs),
        }
    }
}

/// Materials keyed by instance label. `NOISE` (-1) may carry its own entry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MaterialSet {
    entries: Vec<MaterialParams>,
}

impl MaterialSet {
    pub fn new(entries: Vec<MaterialParams>) -> Result<Self, MpmError> {
        let mut set = Self::default();
        for m in entries {
            if set.get(m.label).is_some() {
                return Err(MpmError::Config(format!("duplicate material for label {}", m.label)));
            }
            m.validate()?;
            set.entries.push(m);
        }
        set.entries.sort_by_key(|m| m.label);
        Ok(set)
    }

    pub fn get(&self, label: i32) -> Option<&MaterialParams> {
        self.entries.iter().find(|m| m.label == label)
    }

    pub fn get_mut(&mut self, label: i32) -> Option<&mut MaterialParams> {
        self.entries.iter_mut().find(|m| m.label == label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MaterialParams> {
        self.entries.iter()
    }

    pub fn labels(&self) -> Vec<i32> {
        self.entries.iter().map(|m| m.label).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fails on the first label in `labels` without a material.
    pub fn check_covers(&self, labels: &[i32]) -> Result<(), MpmError> {
        let mut seen: Vec<i32> = labels.to_vec();
        seen.sort_unstable();
        seen.dedup();
        for l in seen {
            if self.get(l).is_none() {
                return Err(MpmError::MissingMaterial(l));
            }
        }
        Ok(())
    }
}
