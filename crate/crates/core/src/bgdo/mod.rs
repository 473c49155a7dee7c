//! Young's modulus calibration from three stored frames.
//!
//! The forward simulation keeps no sensitivity state. Afterwards each stored
//! frame is replayed for a single substep with the stress sensitivity to
//! log E tracked per particle, and every label's modulus is updated in log
//! space from the compressed stress signal and the deformation signal.

mod pipeline;

pub use pipeline::{
    check_labels, run_pipeline, PipelineError, PipelineOutput, PipelineParams, StageTiming, TimingReport,
};

use crate::constitutive::{stress_and_sensitivity, MaterialParams};
use crate::mpm::{FrameSnapshot, MaterialSet, MpmError, SimConfig, Solver};
use crate::pointset::NOISE;
use crate::Mat3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower and upper clamp for updated moduli.
pub const YOUNG_MIN: f64 = 1e-2;
pub const YOUNG_MAX: f64 = 1e12;
/// Fraction of skipped particles above which a label is not updated.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

#[derive(Debug, Error)]
pub enum BgdoError {
    #[error("no snapshots to optimize from")]
    NoSnapshots,
    #[error("non-finite update for label {label} at iteration {iteration}: g_tau = {g_tau}, d_F = {d_f}, eta = {eta}")]
    NonFinite { iteration: usize, label: i32, g_tau: f64, d_f: f64, eta: f64 },
    #[error("replay of frame {frame} failed: {source}")]
    Replay { frame: usize, source: MpmError },
    #[error(transparent)]
    Mpm(#[from] MpmError),
}

/// `η = min(1, 0.1 · ln(1 + E))`.
pub fn eta(young: f64) -> f64 {
    (0.1 * young.max(0.0).ln_1p()).min(1.0)
}

/// Label-wise means from one replayed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSignal {
    pub label: i32,
    /// Mean `∂‖τ‖/∂ log E` over the label's particles.
    pub g_tau: f64,
    /// Mean `‖F' − I‖_F` over the label's particles.
    pub d_f: f64,
    pub particles: usize,
    pub skipped: usize,
}

/// Per-label combined signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationSignal {
    pub label: i32,
    pub g_tau: f64,
    /// `ln(1 + |g_τ|)`.
    pub g_compressed: f64,
    pub d_f: f64,
    pub delta_target: f64,
    pub eta: f64,
    /// The update `𝒢`; `log E ← log E − 𝒢`.
    pub update: f64,
}

/// One line of the audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub iteration: usize,
    pub label: i32,
    pub young_before: f64,
    pub g_tau: f64,
    pub d_f: f64,
    pub eta: f64,
    pub update: f64,
    pub young_after: f64,
    /// Set when too many particles were skipped and E was left unchanged.
    #[serde(default)]
    pub suppressed: bool,
    /// Set when the updated value hit the modulus bounds.
    #[serde(default)]
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BgdoConfig {
    pub iterations: usize,
    pub delta_target: f64,
}

impl Default for BgdoConfig {
    fn default() -> Self {
        Self { iterations: 2, delta_target: 0.1 }
    }
}

/// Frames stored for calibration: first, middle (`⌊n/2⌋`) and last.
pub fn key_frames(frames: usize) -> Vec<usize> {
    let n = frames.saturating_sub(1);
    let mut k = vec![0, n / 2, n];
    k.dedup();
    k
}

/// Calibrated labels: every material label present in `labels` except NOISE,
/// ascending.
fn calibrated_labels(materials: &MaterialSet, labels: &[i32]) -> Vec<i32> {
    let mut present: Vec<i32> = labels.iter().copied().filter(|&l| l != NOISE).collect();
    present.sort_unstable();
    present.dedup();
    present.retain(|&l| materials.get(l).is_some());
    present
}

/// Replays one substep from `snapshot` and returns label-wise signal means.
///
/// The snapshot is only read. Particles whose stress or deformation update
/// fails are left out of the means and counted in `skipped`.
pub fn pseudo_step_signals(
    snapshot: &FrameSnapshot,
    materials: &MaterialSet,
    solver: &mut Solver,
    dt: f64,
    work: &mut ReplayWork,
) -> Result<Vec<LabelSignal>, BgdoError> {
    let n = snapshot.len();
    let labels = snapshot.labels();
    work.skipped.clear();
    work.skipped.resize(n, false);
    let t = snapshot.frame as f64 * solver.config().frame_dt;
    solver
        .step_deformation(&snapshot.view(), dt, t, &mut work.f_next, &mut work.skipped)
        .map_err(|source| BgdoError::Replay { frame: snapshot.frame, source })?;

    let ids = calibrated_labels(materials, labels);
    let mut sums = vec![(0.0f64, 0.0f64, 0usize, 0usize); ids.len()];
    for p in 0..n {
        let Ok(slot) = ids.binary_search(&labels[p]) else { continue };
        let m = materials.get(labels[p]).expect("label has a material");
        let entry = &mut sums[slot];
        if work.skipped[p] {
            entry.3 += 1;
            continue;
        }
        match stress_and_sensitivity(m.elasticity, &snapshot.f[p], m.young, m.poisson) {
            Ok((_, g)) => {
                let d = (work.f_next[p] - Mat3::identity()).norm();
                entry.0 += g;
                entry.1 += d;
                entry.2 += 1;
            }
            Err(_) => entry.3 += 1,
        }
    }
    Ok(ids
        .iter()
        .zip(sums)
        .map(|(&label, (g, d, count, skipped))| {
            let c = count.max(1) as f64;
            LabelSignal { label, g_tau: g / c, d_f: d / c, particles: count + skipped, skipped }
        })
        .collect())
}

/// Reusable buffers for replays.
#[derive(Default)]
pub struct ReplayWork {
    f_next: Vec<Mat3>,
    skipped: Vec<bool>,
}

/// `𝒢 = η(E)·ln(1 + |g_τ|) − (1 − η(E))·(d_F − δ_target)`.
pub fn combine(label: i32, g_tau: f64, d_f: f64, young: f64, delta_target: f64) -> OptimizationSignal {
    let e = eta(young);
    let g_compressed = g_tau.abs().ln_1p();
    OptimizationSignal {
        label,
        g_tau,
        g_compressed,
        d_f,
        delta_target,
        eta: e,
        update: e * g_compressed - (1.0 - e) * (d_f - delta_target),
    }
}

/// Runs `config.iterations` updates from the same stored frames.
///
/// `sim` and `dt` must be the configuration and substep length of the forward
/// run that produced the snapshots.
pub fn bgdo_update(
    materials: &MaterialSet,
    snapshots: &[FrameSnapshot],
    sim: &SimConfig,
    dt: f64,
    config: &BgdoConfig,
    first_iteration: usize,
) -> Result<(MaterialSet, Vec<AuditRecord>), BgdoError> {
    let first = snapshots.first().ok_or(BgdoError::NoSnapshots)?;
    let labels = first.labels();
    let mut current = materials.clone();
    let mut audit = Vec::new();
    let mut solver = Solver::new(sim.clone(), &current, labels)?;
    let mut work = ReplayWork::default();
    let ids = calibrated_labels(&current, labels);

    for it in 0..config.iterations {
        let iteration = first_iteration + it;
        solver.set_materials(&current, labels)?;
        let mut g_sum = vec![0.0; ids.len()];
        let mut d_sum = vec![0.0; ids.len()];
        let mut skipped = vec![0usize; ids.len()];
        let mut particles = vec![0usize; ids.len()];
        for snap in snapshots {
            for s in pseudo_step_signals(snap, &current, &mut solver, dt, &mut work)? {
                let k = ids.binary_search(&s.label).expect("same label set");
                g_sum[k] += s.g_tau;
                d_sum[k] += s.d_f;
                skipped[k] = skipped[k].max(s.skipped);
                particles[k] = s.particles;
            }
        }
        let count = snapshots.len() as f64;
        let mut next = current.clone();
        for (k, &label) in ids.iter().enumerate() {
            let m = current.get(label).expect("calibrated label has a material");
            let sig = combine(label, g_sum[k] / count, d_sum[k] / count, m.young, config.delta_target);
            if !sig.update.is_finite() {
                return Err(BgdoError::NonFinite { iteration, label, g_tau: sig.g_tau, d_f: sig.d_f, eta: sig.eta });
            }
            let suppressed = skipped[k] as f64 > MAX_SKIPPED_FRACTION * particles[k] as f64;
            let (young_after, clamped) = if suppressed {
                log::warn!(
                    "label {label}: {} of {} particles skipped in replay; update suppressed",
                    skipped[k],
                    particles[k]
                );
                (m.young, false)
            } else {
                let raw = m.young * (-sig.update).exp();
                let e = raw.clamp(YOUNG_MIN, YOUNG_MAX);
                if e != raw {
                    log::warn!("label {label}: E = {raw:e} clamped to {e:e}");
                }
                (e, e != raw)
            };
            audit.push(AuditRecord {
                iteration,
                label,
                young_before: m.young,
                g_tau: sig.g_tau,
                d_f: sig.d_f,
                eta: sig.eta,
                update: sig.update,
                young_after,
                suppressed,
                clamped,
            });
            log::info!(
                "iteration {iteration} label {label}: E {:.4e} -> {young_after:.4e} (g_tau {:.4e}, d_F {:.4}, eta {:.4}, G {:.4})",
                m.young,
                sig.g_tau,
                sig.d_f,
                sig.eta,
                sig.update
            );
            next.get_mut(label).expect("label exists").young = young_after;
        }
        current = next;
    }
    Ok((current, audit))
}

/// Copies `young` values for every label from `from` into `into`.
pub fn apply_moduli(into: &mut MaterialSet, from: &MaterialSet) {
    for m in from.iter() {
        if let Some(t) = into.get_mut(m.label) {
            t.young = m.young;
        }
    }
}

/// Writes audit records as one JSON object per line.
pub fn audit_to_json_lines(records: &[AuditRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("audit records serialize"));
        out.push('\n');
    }
    out
}

/// Material with `young` replaced, for building calibration runs.
pub fn with_young(m: &MaterialParams, young: f64) -> MaterialParams {
    MaterialParams { young, ..m.clone() }
}
