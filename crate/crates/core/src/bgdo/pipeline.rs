use super::{bgdo_update, key_frames, AuditRecord, BgdoConfig, BgdoError};
use crate::alloc_track;
use crate::ipf::{fill_pipeline, FillOutput, FillParams, IpfError};
use crate::mpm::{simulate, MaterialSet, MpmError, ParticleState, SimConfig, SimOptions, TimeStep};
use crate::pointset::PointSet;
use crate::Vec3;
use std::fmt;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("labels: {0}")]
    Labels(String),
    #[error("fill: {0}")]
    Fill(#[from] IpfError),
    #[error("forward: {0}")]
    Forward(MpmError),
    #[error("optimize: {0}")]
    Optimize(BgdoError),
    #[error("final: {0}")]
    Final(MpmError),
}

#[derive(Clone, Debug)]
pub struct PipelineParams {
    pub fill: FillParams,
    pub seed: u64,
    pub sim: SimConfig,
    pub materials: MaterialSet,
    pub bgdo: BgdoConfig,
    /// Frames captured for calibration; defaults to first, middle and last.
    pub snapshot_frames: Option<Vec<usize>>,
    /// Re-run the forward pass after every update instead of replaying the
    /// same snapshots.
    pub resimulate_between_iterations: bool,
}

/// One row of the timing report.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
    /// Heap high-water mark during the stage; `None` without the tracking
    /// allocator.
    pub peak_mb: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<StageTiming>,
}

impl TimingReport {
    pub fn get(&self, stage: &str) -> Option<&StageTiming> {
        self.rows.iter().find(|r| r.stage == stage)
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>12} {:>12}", "stage", "seconds", "peak MB")?;
        for r in &self.rows {
            let mb = r.peak_mb.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
            writeln!(f, "{:<10} {:>12.4} {:>12}", r.stage, r.seconds, mb)?;
        }
        Ok(())
    }
}

struct Stage {
    name: &'static str,
    start: Instant,
}

impl Stage {
    fn begin(name: &'static str) -> Self {
        alloc_track::reset_peak();
        Stage { name, start: Instant::now() }
    }

    fn end(self) -> StageTiming {
        let seconds = self.start.elapsed().as_secs_f64();
        let peak_mb = alloc_track::is_active().then(|| alloc_track::peak_bytes() as f64 / (1024.0 * 1024.0));
        log::info!("stage {} finished in {seconds:.3} s", self.name);
        StageTiming { stage: self.name, seconds, peak_mb }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub filled: FillOutput,
    pub calibrated: MaterialSet,
    pub audit: Vec<AuditRecord>,
    /// Particle positions at the entry of every frame of the final run.
    pub frames: Vec<Vec<Vec3>>,
    pub forward_timestep: TimeStep,
    pub timing: TimingReport,
}

/// Material labels must match the labels present in the particle set exactly.
pub fn check_labels(materials: &MaterialSet, labels: &[i32]) -> Result<(), String> {
    materials.check_covers(labels).map_err(|e| e.to_string())?;
    for l in materials.labels() {
        if !labels.contains(&l) {
            return Err(format!("material label {l} does not match any instance"));
        }
    }
    Ok(())
}

fn seed_state(filled: &FillOutput, materials: &MaterialSet, sim: &SimConfig) -> Result<ParticleState, MpmError> {
    ParticleState::seed(filled.points.positions(), filled.labels.labels(), materials, sim.grid)
}

/// Fill, forward simulation with snapshots, calibration and a final run with
/// the calibrated moduli. `points` must already be in simulation coordinates.
pub fn run_pipeline(points: &PointSet, params: &PipelineParams) -> Result<PipelineOutput, PipelineError> {
    let total = Instant::now();
    alloc_track::reset_peak();
    let total_peak_base = alloc_track::peak_bytes();
    let mut rows = Vec::new();
    let mut overall_peak = total_peak_base;

    let stage = Stage::begin("fill");
    let filled = fill_pipeline(points, &params.fill, params.sim.dx(), params.seed)?;
    check_labels(&params.materials, filled.labels.labels()).map_err(PipelineError::Labels)?;
    overall_peak = overall_peak.max(alloc_track::peak_bytes());
    rows.push(stage.end());

    let snapshot_frames = params.snapshot_frames.clone().unwrap_or_else(|| key_frames(params.sim.frames));
    let forward = |materials: &MaterialSet| -> Result<_, MpmError> {
        let state = seed_state(&filled, materials, &params.sim)?;
        let opts = SimOptions { snapshot_frames: snapshot_frames.clone(), record_frames: false };
        let out = simulate(state, materials, &params.sim, &opts)?;
        Ok((out.snapshots, out.timestep))
    };

    let stage = Stage::begin("forward");
    let (mut snapshots, forward_timestep) = forward(&params.materials).map_err(PipelineError::Forward)?;
    overall_peak = overall_peak.max(alloc_track::peak_bytes());
    rows.push(stage.end());

    let stage = Stage::begin("optimize");
    let mut calibrated = params.materials.clone();
    let mut audit = Vec::new();
    if params.resimulate_between_iterations {
        let mut dt = forward_timestep.dt;
        for it in 0..params.bgdo.iterations {
            if it > 0 {
                let (s, ts) = forward(&calibrated).map_err(|e| PipelineError::Optimize(BgdoError::Mpm(e)))?;
                snapshots = s;
                dt = ts.dt;
            }
            let one = BgdoConfig { iterations: 1, ..params.bgdo.clone() };
            let (m, a) =
                bgdo_update(&calibrated, &snapshots, &params.sim, dt, &one, it).map_err(PipelineError::Optimize)?;
            calibrated = m;
            audit.extend(a);
        }
    } else if params.bgdo.iterations > 0 {
        let (m, a) = bgdo_update(&calibrated, &snapshots, &params.sim, forward_timestep.dt, &params.bgdo, 0)
            .map_err(PipelineError::Optimize)?;
        calibrated = m;
        audit = a;
    }
    drop(snapshots);
    overall_peak = overall_peak.max(alloc_track::peak_bytes());
    rows.push(stage.end());

    let stage = Stage::begin("final");
    let state = seed_state(&filled, &calibrated, &params.sim).map_err(PipelineError::Final)?;
    let out = simulate(state, &calibrated, &params.sim, &SimOptions { snapshot_frames: vec![], record_frames: true })
        .map_err(PipelineError::Final)?;
    overall_peak = overall_peak.max(alloc_track::peak_bytes());
    rows.push(stage.end());

    rows.push(StageTiming {
        stage: "total",
        seconds: total.elapsed().as_secs_f64(),
        peak_mb: alloc_track::is_active().then(|| overall_peak as f64 / (1024.0 * 1024.0)),
    });
    let timing = TimingReport { rows };
    log::info!("timing\n{timing}");
    Ok(PipelineOutput { filled, calibrated, audit, frames: out.frames, forward_timestep, timing })
}
