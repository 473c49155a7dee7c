//! Command-line driver.
//!
//! Exit codes: 0 on success, 2 for configuration and validation errors
//! (nothing is written), 3 for failures while a stage runs.

pub mod config;
pub mod io;
pub mod scene;

pub use config::{parse_config, BgdoSection, ConfigError, MaterialEntry, PipelineConfig};
pub use scene::{generate, Scene, SceneKind};

use crate::bgdo::{
    audit_to_json_lines, bgdo_update, check_labels, key_frames, run_pipeline, BgdoError, PipelineError, PipelineParams,
};
use crate::ipf::{fill_pipeline, FillParams};
use crate::mpm::{simulate, MpmError, ParticleState, SimOptions};
use crate::pointset::{load_ply, normalize_to_unit_cube, save_frames, save_ply, LabelStore, PlyFormat, PointSet};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "splatphys", version, about = "Fill, simulate and calibrate splat point clouds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cluster a point cloud and fill every instance's interior.
    Fill(FillArgs),
    /// Run the forward simulation and store frames and calibration snapshots.
    Simulate(SimulateArgs),
    /// Calibrate Young's moduli from stored snapshots.
    Optimize(OptimizeArgs),
    /// Fill, simulate, calibrate and re-simulate.
    Pipeline(PipelineArgs),
    /// Write a bundled synthetic scene and a matching config.
    Scene(SceneArgs),
}

#[derive(Debug, Args)]
pub struct FillArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "out")]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub radius: f64,
    #[arg(long, default_value_t = 10)]
    pub min_pts: usize,
    #[arg(long, default_value_t = 0.02)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.6)]
    pub occ_threshold: f64,
    #[arg(long = "candidates", default_value_t = 20_000)]
    pub candidates: usize,
    #[arg(long, default_value_t = 8.0)]
    pub fill_density: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid resolution that sets the fill spacing.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Rescale the input so its largest extent is this fraction of the domain.
    #[arg(long)]
    pub normalize: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Filled point cloud with labels; defaults to `<output>/filled.ply`.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Output directory; defaults to the config's `output`.
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Frames to read, as stored by `simulate`, e.g. `0,74,149`.
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<usize>>,
    /// Audit log path; defaults to `<output>/audit.jsonl`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Directory written by `simulate`; defaults to the config's `output`.
    #[arg(long)]
    pub run: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resimulate_between_iterations: bool,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[arg(long, value_enum)]
    pub kind: SceneKind,
    /// Directory receiving `scene.ply` and `config.toml`.
    #[arg(long = "out")]
    pub output: PathBuf,
}

/// Failure of a subcommand, tagged with its stage.
#[derive(Debug)]
pub enum CliError {
    Config { stage: &'static str, message: String },
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime { .. } => 3,
        }
    }

    fn config(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Config { stage, message: e.to_string() }
    }

    fn runtime(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime { stage, message: e.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config { stage, message } => write!(f, "[{stage}] configuration error: {message}"),
            CliError::Runtime { stage, message } => write!(f, "[{stage}] {message}"),
        }
    }
}

/// Errors that are detected before anything runs.
fn is_validation_error(e: &MpmError) -> bool {
    matches!(
        e,
        MpmError::MissingMaterial(_)
            | MpmError::Material(_)
            | MpmError::Config(_)
            | MpmError::Cfl { .. }
            | MpmError::OutOfDomain { .. }
    )
}

fn mpm_error(stage: &'static str, e: MpmError) -> CliError {
    if is_validation_error(&e) {
        CliError::config(stage, e)
    } else {
        CliError::runtime(stage, e)
    }
}

fn load_input(path: &Path, stage: &'static str) -> Result<(PointSet, Option<LabelStore>), CliError> {
    load_ply(path).map_err(|e| CliError::config(stage, e))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fill(a) => run_fill(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Pipeline(a) => run_pipeline_cmd(a),
        Command::Scene(a) => run_scene(a),
    }
}

fn run_fill(a: FillArgs) -> Result<(), CliError> {
    let params = FillParams {
        radius: a.radius,
        min_pts: a.min_pts,
        sigma: a.sigma,
        candidates: a.candidates,
        occ_threshold: a.occ_threshold,
        fill_density: a.fill_density,
    };
    params.validate().map_err(|e| CliError::config("fill", e))?;
    if a.grid < 8 {
        return Err(CliError::config("fill", format!("grid must be at least 8, got {}", a.grid)));
    }
    let (mut points, _) = load_input(&a.input, "fill")?;
    if let Some(extent) = a.normalize {
        points = normalize_to_unit_cube(&points, extent).map_err(|e| CliError::config("fill", e))?.0;
    }
    let out = fill_pipeline(&points, &params, 1.0 / a.grid as f64, a.seed).map_err(|e| CliError::runtime("fill", e))?;
    if let Some(dir) = a.output.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::runtime("fill", format!("{}: {e}", dir.display())))?;
    }
    save_ply(&a.output, &out.points, Some(out.labels.labels()), PlyFormat::BinaryLittleEndian)
        .map_err(|e| CliError::runtime("fill", e))?;
    log::info!("wrote {} points ({} filled) to {}", out.points.len(), out.points.filled_count(), a.output.display());
    Ok(())
}

fn load_config(path: &Path, stage: &'static str) -> Result<PipelineConfig, CliError> {
    parse_config(path).map_err(|e| CliError::config(stage, e))
}

fn run_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config, "simulate")?;
    let out_dir = a.output.unwrap_or_else(|| cfg.output.clone());
    let input = a.input.unwrap_or_else(|| out_dir.join("filled.ply"));
    let (points, labels) = load_input(&input, "simulate")?;
    let labels =
        labels.ok_or_else(|| CliError::config("simulate", format!("{} has no label column", input.display())))?;
    let materials = cfg.material_set().map_err(|e| CliError::config("simulate", e))?;
    check_labels(&materials, labels.labels()).map_err(|e| CliError::config("simulate", e))?;
    let state = ParticleState::seed(points.positions(), labels.labels(), &materials, cfg.sim.grid)
        .map_err(|e| mpm_error("simulate", e))?;
    let snapshot_frames = cfg.bgdo.snapshot_frames.clone().unwrap_or_else(|| key_frames(cfg.sim.frames));
    let opts = SimOptions { snapshot_frames: snapshot_frames.clone(), record_frames: true };
    let out = simulate(state, &materials, &cfg.sim, &opts).map_err(|e| mpm_error("simulate", e))?;

    let rt = |e: &dyn std::fmt::Display| CliError::runtime("simulate", e);
    save_frames(
        &out.frames,
        labels.labels(),
        points.is_filled(),
        &out_dir.join("frames"),
        PlyFormat::BinaryLittleEndian,
    )
    .map_err(|e| rt(&e))?;
    let snap_dir = out_dir.join("snapshots");
    std::fs::create_dir_all(&snap_dir).map_err(|e| rt(&e))?;
    for s in &out.snapshots {
        io::save_snapshot(&snap_dir.join(io::snapshot_file_name(s.frame)), s).map_err(|e| rt(&e))?;
    }
    let info = io::RunInfo { dt: out.timestep.dt, substeps: out.timestep.substeps, snapshot_frames };
    io::write_atomic(&out_dir.join("run.json"), serde_json::to_string_pretty(&info).expect("serializes").as_bytes())
        .map_err(|e| rt(&e))?;
    log::info!("wrote {} frames to {}", out.frames.len(), out_dir.display());
    Ok(())
}

fn run_optimize(a: OptimizeArgs) -> Result<(), CliError> {
    let cfg = load_config(&a.config, "optimize")?;
    let run_dir = a.run.unwrap_or_else(|| cfg.output.clone());
    let info_path = run_dir.join("run.json");
    let info: io::RunInfo = std::fs::read_to_string(&info_path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
        .map_err(|e| CliError::config("optimize", format!("{}: {e}", info_path.display())))?;
    let frames = a.snapshots.unwrap_or_else(|| info.snapshot_frames.clone());
    let mut snapshots = Vec::new();
    for f in frames {
        let p = run_dir.join("snapshots").join(io::snapshot_file_name(f));
        snapshots.push(io::load_snapshot(&p).map_err(|e| CliError::config("optimize", e))?);
    }
    let materials = cfg.material_set().map_err(|e| CliError::config("optimize", e))?;
    if let Some(s) = snapshots.first() {
        check_labels(&materials, s.labels()).map_err(|e| CliError::config("optimize", e))?;
    }
    let mut bgdo = cfg.bgdo.update_config();
    if let Some(n) = a.iterations {
        bgdo.iterations = n;
    }
    let (calibrated, audit) =
        bgdo_update(&materials, &snapshots, &cfg.sim, info.dt, &bgdo, 0).map_err(|e| match e {
            BgdoError::NoSnapshots => CliError::config("optimize", e),
            e => CliError::runtime("optimize", e),
        })?;
    let report = a.report.unwrap_or_else(|| run_dir.join("audit.jsonl"));
    let rt = |e: std::io::Error| CliError::runtime("optimize", e);
    io::write_atomic(&report, audit_to_json_lines(&audit).as_bytes()).map_err(rt)?;
    io::write_atomic(&run_dir.join("materials.toml"), io::materials_to_toml(&calibrated).as_bytes()).map_err(rt)?;
    Ok(())
}

fn run_pipeline_cmd(a: PipelineArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&a.config, "pipeline")?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.resimulate_between_iterations {
        cfg.bgdo.resimulate_between_iterations = true;
    }
    run_pipeline_config(&cfg)
}

/// The `pipeline` subcommand on an already parsed config.
pub fn run_pipeline_config(cfg: &PipelineConfig) -> Result<(), CliError> {
    let (mut points, _) = load_input(&cfg.input, "pipeline")?;
    if cfg.normalize {
        points = normalize_to_unit_cube(&points, cfg.extent).map_err(|e| CliError::config("pipeline", e))?.0;
    }
    let materials = cfg.material_set().map_err(|e| CliError::config("pipeline", e))?;
    let params = PipelineParams {
        fill: cfg.fill.clone(),
        seed: cfg.seed,
        sim: cfg.sim.clone(),
        materials,
        bgdo: cfg.bgdo.update_config(),
        snapshot_frames: cfg.bgdo.snapshot_frames.clone(),
        resimulate_between_iterations: cfg.bgdo.resimulate_between_iterations,
    };
    let out = run_pipeline(&points, &params).map_err(|e| match e {
        PipelineError::Labels(_) => CliError::config("pipeline", e),
        PipelineError::Forward(m) if is_validation_error(&m) => CliError::config("forward", m),
        PipelineError::Fill(e) => CliError::runtime("fill", e),
        PipelineError::Forward(e) => CliError::runtime("forward", e),
        PipelineError::Optimize(e) => CliError::runtime("optimize", e),
        PipelineError::Final(e) => CliError::runtime("final", e),
    })?;

    let dir = &cfg.output;
    let rt = |e: &dyn std::fmt::Display| CliError::runtime("export", e);
    std::fs::create_dir_all(dir).map_err(|e| rt(&e))?;
    save_ply(
        &dir.join("filled.ply"),
        &out.filled.points,
        Some(out.filled.labels.labels()),
        PlyFormat::BinaryLittleEndian,
    )
    .map_err(|e| rt(&e))?;
    save_frames(
        &out.frames,
        out.filled.labels.labels(),
        out.filled.points.is_filled(),
        &dir.join("frames"),
        PlyFormat::BinaryLittleEndian,
    )
    .map_err(|e| rt(&e))?;
    io::write_atomic(&dir.join("audit.jsonl"), audit_to_json_lines(&out.audit).as_bytes()).map_err(|e| rt(&e))?;
    io::write_atomic(&dir.join("materials.toml"), io::materials_to_toml(&out.calibrated).as_bytes())
        .map_err(|e| rt(&e))?;
    io::write_atomic(&dir.join("timing.txt"), out.timing.to_string().as_bytes()).map_err(|e| rt(&e))?;
    println!("{}", out.timing);
    Ok(())
}

fn run_scene(a: SceneArgs) -> Result<(), CliError> {
    let s = generate(a.kind);
    let rt = |e: &dyn std::fmt::Display| CliError::runtime("scene", e);
    std::fs::create_dir_all(&a.output).map_err(|e| rt(&e))?;
    let ply = a.output.join("scene.ply");
    save_ply(&ply, &PointSet::from_positions(s.points.clone()), None, PlyFormat::BinaryLittleEndian)
        .map_err(|e| rt(&e))?;
    let mut cfg = PipelineConfig::new("scene.ply", "out");
    cfg.normalize = false;
    cfg.materials = s.materials.clone();
    io::write_atomic(&a.output.join("config.toml"), cfg.to_toml().as_bytes()).map_err(|e| rt(&e))?;
    log::info!("wrote {} points to {}", s.points.len(), ply.display());
    Ok(())
}
