//! Instance-aware interior filling.
//!
//! The cloud is clustered into instances; every instance gets a convex hull,
//! uniform candidates in the hull's box are kept when the ray-cast occupancy
//! says they are inside, and the survivors are importance-sampled by their
//! distance to the instance's observed surface points.

mod dbscan;
mod hull;
mod mcis;
mod occupancy;

pub use dbscan::{dbscan, ClusterResult};
pub use hull::{quickhull, ConvexHull};
pub use mcis::{
    importance_weight, mcis_fill, nearest_distances, normalize, sample_candidates, sample_with_replacement,
    sample_without_replacement, CandidateSet, WEIGHT_FLOOR,
};
pub use occupancy::occupancy;

use crate::pointset::{LabelStore, PointSet, PointSetError};
use crate::Vec3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IpfError {
    #[error("input point set is empty")]
    EmptyInput,
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
    #[error("invalid fill parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    PointSet(#[from] PointSetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FillParams {
    /// DBSCAN neighborhood radius.
    pub radius: f64,
    pub min_pts: usize,
    /// Importance-weight bandwidth.
    pub sigma: f64,
    /// Candidates drawn per instance.
    pub candidates: usize,
    pub occ_threshold: f64,
    /// Filled particles per grid-cell volume of hull.
    pub fill_density: f64,
}

impl Default for FillParams {
    fn default() -> Self {
        Self { radius: 0.05, min_pts: 10, sigma: 0.02, candidates: 20_000, occ_threshold: 0.6, fill_density: 8.0 }
    }
}

impl FillParams {
    pub fn validate(&self) -> Result<(), IpfError> {
        let bad = |m: String| Err(IpfError::InvalidParam(m));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if self.min_pts == 0 {
            return bad("min_pts must be at least 1".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self.candidates == 0 {
            return bad("candidates must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.occ_threshold) {
            return bad(format!("occ_threshold must be in [0, 1), got {}", self.occ_threshold));
        }
        if !(self.fill_density >= 0.0 && self.fill_density.is_finite()) {
            return bad(format!("fill_density must be non-negative, got {}", self.fill_density));
        }
        Ok(())
    }
}

/// Per-instance outcome of a fill.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFill {
    pub label: i32,
    pub surface_points: usize,
    /// `None` when the hull was degenerate and filling was skipped.
    pub hull_volume: Option<f64>,
    pub requested: usize,
    pub survivors: usize,
    pub filled: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FillOutput {
    /// Input points followed by the filled points, instance by instance.
    pub points: PointSet,
    pub labels: LabelStore,
    pub clusters: ClusterResult,
    pub instances: Vec<InstanceFill>,
}

/// Per-instance generator stream; independent of how instances are scheduled.
pub fn instance_rng(seed: u64, label: i32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label as u64);
    rng
}

/// Number of particles to fill into a hull of `volume` at grid spacing `dx`.
pub fn requested_count(volume: f64, dx: f64, fill_density: f64) -> usize {
    (fill_density * volume / dx.powi(3)).round() as usize
}

fn fill_instance(label: i32, cluster: &[Vec3], params: &FillParams, dx: f64, seed: u64) -> (Vec<Vec3>, InstanceFill) {
    let mut report =
        InstanceFill { label, surface_points: cluster.len(), hull_volume: None, requested: 0, survivors: 0, filled: 0 };
    let hull = match quickhull(cluster) {
        Ok(h) => h,
        Err(e) => {
            log::warn!("instance {label}: {e}; kept unfilled");
            return (Vec::new(), report);
        }
    };
    let volume = hull.volume();
    report.hull_volume = Some(volume);
    report.requested = requested_count(volume, dx, params.fill_density);
    if report.requested == 0 {
        return (Vec::new(), report);
    }
    let mut rng = instance_rng(seed, label);
    let mut cands = sample_candidates(&hull, params.candidates, &mut rng);
    cands.score(&hull);
    cands.retain_above(params.occ_threshold);
    report.survivors = cands.len();
    if cands.len() < report.requested {
        log::warn!(
            "instance {label}: {} survivors for {} requested; using all survivors",
            cands.len(),
            report.requested
        );
    }
    let filled = mcis_fill(&mut cands, cluster, params.sigma, report.requested, &mut rng);
    report.filled = filled.len();
    (filled, report)
}

/// Clusters, fills every instance and merges the result.
///
/// `dx` is the simulation grid spacing that converts `fill_density` into a
/// particle count. Instance `k` draws from its own stream derived from
/// `(seed, k)`, so the output does not depend on thread scheduling.
pub fn fill_pipeline(points: &PointSet, params: &FillParams, dx: f64, seed: u64) -> Result<FillOutput, IpfError> {
    params.validate()?;
    let clusters = dbscan(points.positions(), params.radius, params.min_pts)?;
    log::info!(
        "{} instances, {} noise points",
        clusters.count(),
        clusters.labels.iter().filter(|&&l| l == crate::pointset::NOISE).count()
    );
    let per_instance: Vec<(Vec<Vec3>, InstanceFill)> = clusters
        .clusters
        .par_iter()
        .enumerate()
        .map(|(k, idx)| {
            let cluster: Vec<Vec3> = idx.iter().map(|&i| points.positions()[i]).collect();
            fill_instance(k as i32, &cluster, params, dx, seed)
        })
        .collect();

    let mut labels = LabelStore::new(clusters.labels.clone(), clusters.count())?;
    let mut filled = Vec::new();
    let mut instances = Vec::new();
    for (pts, report) in per_instance {
        labels.extend_with(report.label, pts.len())?;
        filled.extend(pts);
        log::info!(
            "instance {}: {} surface points, {} filled ({} survivors)",
            report.label,
            report.surface_points,
            report.filled,
            report.survivors
        );
        instances.push(report);
    }
    Ok(FillOutput { points: points.with_filled(&filled), labels, clusters, instances })
}
