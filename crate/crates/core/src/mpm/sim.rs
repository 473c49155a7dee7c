use super::transfer::{deformation_after_step, g2p_impl, p2g_impl, MaterialTable, ParticleView};
use super::{FrameSnapshot, Grid, MaterialSet, MpmError, ParticleState, SimConfig, CFL_LIMIT};
use crate::{Mat3, Vec3};

/// Resolved substep length and count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStep {
    pub dt: f64,
    pub substeps: usize,
    /// Speed bound used by the CFL guard.
    pub v_max: f64,
    /// `CFL_LIMIT · dx / v_max`.
    pub limit: f64,
}

/// Derives `dt` and the substep count per frame.
///
/// The speed bound adds the P-wave speed `√((λ+2μ)_max / ρ_min)` (never below
/// `√(E_max/ρ_min)`), the fastest initial particle speed, the free-fall speed
/// over the unit height and the velocity gained from acceleration windows.
pub fn resolve_timestep(
    cfg: &SimConfig,
    materials: &MaterialSet,
    max_initial_speed: f64,
) -> Result<TimeStep, MpmError> {
    cfg.validate()?;
    let mut modulus_max: f64 = 0.0;
    let mut rho_min = f64::INFINITY;
    for m in materials.iter() {
        let l = m.lame()?;
        modulus_max = modulus_max.max(l.lambda + 2.0 * l.mu).max(m.young);
        rho_min = rho_min.min(m.density);
    }
    let wave = if materials.is_empty() { 0.0 } else { (modulus_max / rho_min).sqrt() };
    let fall = (2.0 * cfg.gravity().norm()).sqrt();
    let total = cfg.frames as f64 * cfg.frame_dt;
    let pushed: f64 = cfg
        .accelerations
        .iter()
        .map(|w| Vec3::from(w.accel).norm() * (w.end.min(total) - w.start.max(0.0)).max(0.0))
        .sum();
    let v_max = (wave + max_initial_speed + fall + pushed).max(1e-12);
    let dx = cfg.dx();
    let limit = CFL_LIMIT * dx / v_max;

    let check = |dt: f64, substeps: usize| {
        if dt > limit * (1.0 + 1e-12) {
            Err(MpmError::Cfl { dt, limit, v_max })
        } else {
            Ok(TimeStep { dt, substeps, v_max, limit })
        }
    };
    match (cfg.dt, cfg.substeps) {
        (Some(dt), Some(s)) => {
            if ((dt * s as f64) - cfg.frame_dt).abs() > 1e-9 * cfg.frame_dt {
                return Err(MpmError::Config(format!(
                    "dt {dt} times substeps {s} does not equal frame_dt {}",
                    cfg.frame_dt
                )));
            }
            check(dt, s)
        }
        (Some(dt), None) => {
            let s = (cfg.frame_dt / dt - 1e-9).ceil().max(1.0) as usize;
            check(cfg.frame_dt / s as f64, s)
        }
        (None, Some(s)) => check(cfg.frame_dt / s as f64, s),
        (None, None) => {
            let target = cfg.cfl * dx / v_max;
            let s = (cfg.frame_dt / target).ceil().max(1.0) as usize;
            check(cfg.frame_dt / s as f64, s)
        }
    }
}

/// Owns the grid and resolved materials so repeated steps reuse storage.
pub struct Solver {
    config: SimConfig,
    grid: Grid,
    table: MaterialTable,
    scratch: Vec<Mat3>,
}

impl Solver {
    pub fn new(config: SimConfig, materials: &MaterialSet, labels: &[i32]) -> Result<Self, MpmError> {
        config.validate()?;
        Ok(Self {
            grid: Grid::new(config.grid),
            table: MaterialTable::new(materials, labels)?,
            config,
            scratch: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Swaps in new material parameters for the same particle labels.
    pub fn set_materials(&mut self, materials: &MaterialSet, labels: &[i32]) -> Result<(), MpmError> {
        self.table = MaterialTable::new(materials, labels)?;
        Ok(())
    }

    /// One full substep at time `t`. Returns the number of clamped particles.
    pub fn step(&mut self, state: &mut ParticleState, dt: f64, t: f64) -> Result<usize, MpmError> {
        let mode = self.config.mode;
        p2g_impl(&state.view(), &self.table, &mut self.grid, dt, mode, &mut self.scratch, None)?;
        self.grid.update(dt, self.config.acceleration_at(t), &self.config.boundaries, self.config.margin);
        g2p_impl(state, &self.grid, dt, &self.table, self.config.margin, mode)
    }

    /// One substep from a frozen state that produces only the updated
    /// deformation gradients. Particles whose stress or plastic projection
    /// fails are flagged in `skipped` and do not abort the step.
    pub fn step_deformation(
        &mut self,
        view: &ParticleView,
        dt: f64,
        t: f64,
        out: &mut Vec<Mat3>,
        skipped: &mut [bool],
    ) -> Result<(), MpmError> {
        let mode = self.config.mode;
        p2g_impl(view, &self.table, &mut self.grid, dt, mode, &mut self.scratch, Some(skipped))?;
        self.grid.update(dt, self.config.acceleration_at(t), &self.config.boundaries, self.config.margin);
        deformation_after_step(view, &self.grid, dt, &self.table, out, skipped)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimOptions {
    /// Frames whose entry state is deep-copied.
    pub snapshot_frames: Vec<usize>,
    /// Keep the entry positions of every frame.
    pub record_frames: bool,
}

#[derive(Debug)]
pub struct SimOutput {
    pub final_state: ParticleState,
    pub snapshots: Vec<FrameSnapshot>,
    /// Positions at the entry of each frame.
    pub frames: Vec<Vec<Vec3>>,
    pub timestep: TimeStep,
    /// Particle clamp events summed over all substeps.
    pub clamp_events: usize,
}

/// Runs `config.frames` frames of `substeps` steps each. Snapshots and frame
/// positions are taken at frame entry, before that frame's substeps.
pub fn simulate(
    mut state: ParticleState,
    materials: &MaterialSet,
    config: &SimConfig,
    options: &SimOptions,
) -> Result<SimOutput, MpmError> {
    config.validate()?;
    materials.check_covers(state.labels())?;
    for &f in &options.snapshot_frames {
        if f >= config.frames {
            return Err(MpmError::Config(format!("snapshot frame {f} is outside 0..{}", config.frames)));
        }
    }
    for (p, x) in state.x.iter().enumerate() {
        if super::stencil(x, config.grid).is_none() {
            return Err(MpmError::OutOfDomain { particle: p, position: [x.x, x.y, x.z] });
        }
    }
    let v0 = state.v.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let ts = resolve_timestep(config, materials, v0)?;
    log::info!(
        "simulating {} particles: {} frames x {} substeps, dt = {:.3e} (limit {:.3e})",
        state.len(),
        config.frames,
        ts.substeps,
        ts.dt,
        ts.limit
    );

    let mut solver = Solver::new(config.clone(), materials, state.labels())?;
    let mut snapshots = Vec::new();
    let mut frames = Vec::with_capacity(if options.record_frames { config.frames } else { 0 });
    let mut clamp_events = 0;
    for frame in 0..config.frames {
        if options.snapshot_frames.contains(&frame) {
            snapshots.push(state.snapshot(frame));
        }
        if options.record_frames {
            frames.push(state.x.clone());
        }
        for s in 0..ts.substeps {
            let t = frame as f64 * config.frame_dt + s as f64 * ts.dt;
            clamp_events += solver.step(&mut state, ts.dt, t).map_err(|e| MpmError::At {
                frame,
                substep: s,
                source: Box::new(e),
            })?;
        }
        log::debug!("frame {frame} done");
    }
    if clamp_events > 0 {
        log::debug!("{clamp_events} particle clamp events at the boundary band");
    }
    Ok(SimOutput { final_state: state, snapshots, frames, timestep: ts, clamp_events })
}
