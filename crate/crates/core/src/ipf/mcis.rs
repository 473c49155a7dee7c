use super::dbscan::HashGrid;
use super::{occupancy, ConvexHull};
use crate::Vec3;
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Weight floor for far candidates.
pub const WEIGHT_FLOOR: f64 = 1e-6;

/// Candidate interior points of one instance.
///
/// `occupancy` is filled by [`CandidateSet::score`]; `distances`, `weights`
/// and `probabilities` by [`CandidateSet::weigh`]. After
/// [`CandidateSet::retain_above`] every vector refers to the survivors only.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Vec3>,
    pub occupancy: Vec<f64>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn score(&mut self, hull: &ConvexHull) {
        self.occupancy = self.points.iter().map(|q| occupancy(q, hull)).collect();
    }

    /// Keeps candidates with `occ > threshold`.
    pub fn retain_above(&mut self, threshold: f64) {
        let keep: Vec<bool> = self.occupancy.iter().map(|&o| o > threshold).collect();
        let filter = |v: &mut Vec<f64>| {
            if v.len() == keep.len() {
                let mut i = 0;
                v.retain(|_| (keep[i], i += 1).0);
            }
        };
        filter(&mut self.occupancy);
        filter(&mut self.distances);
        filter(&mut self.weights);
        filter(&mut self.probabilities);
        let mut i = 0;
        self.points.retain(|_| (keep[i], i += 1).0);
    }

    /// Nearest-surface distances, importance weights and their normalization.
    pub fn weigh(&mut self, cluster: &[Vec3], sigma: f64) {
        self.distances = nearest_distances(&self.points, cluster, 3.0 * sigma);
        self.weights = self.distances.iter().map(|&d| importance_weight(d, sigma)).collect();
        self.probabilities = normalize(&self.weights);
    }
}

/// `m` points i.i.d. uniform in the hull's bounding box.
pub fn sample_candidates<R: Rng>(hull: &ConvexHull, m: usize, rng: &mut R) -> CandidateSet {
    let (lo, hi) = hull.aabb();
    let points = (0..m)
        .map(|_| {
            Vec3::new(
                lo.x + (hi.x - lo.x) * rng.gen::<f64>(),
                lo.y + (hi.y - lo.y) * rng.gen::<f64>(),
                lo.z + (hi.z - lo.z) * rng.gen::<f64>(),
            )
        })
        .collect();
    CandidateSet { points, ..CandidateSet::default() }
}

/// `max(exp(−d²/2σ²), 10⁻⁶)`.
pub fn importance_weight(d: f64, sigma: f64) -> f64 {
    (-(d * d) / (2.0 * sigma * sigma)).exp().max(WEIGHT_FLOOR)
}

pub fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

/// Exact distance from each query to its nearest cluster point.
///
/// A hash grid with cell size `cell` answers queries whose nearest point lies
/// within one cell; anything farther falls back to a full scan.
pub fn nearest_distances(queries: &[Vec3], cluster: &[Vec3], cell: f64) -> Vec<f64> {
    if cluster.is_empty() {
        return vec![f64::INFINITY; queries.len()];
    }
    let grid = HashGrid::new(cluster, cell);
    queries
        .iter()
        .map(|q| {
            let mut best = f64::INFINITY;
            grid.for_each_near(q, |j| best = best.min((cluster[j] - q).norm_squared()));
            // Points outside the 3x3x3 block are more than one cell away.
            if best.sqrt() > grid.cell() {
                best = cluster.iter().map(|c| (c - q).norm_squared()).fold(f64::INFINITY, f64::min);
            }
            best.sqrt()
        })
        .collect()
}

/// Draws `k` distinct indices with probability proportional to `weights`
/// (sequential weighted sampling without replacement, by exponential keys).
/// Returns the indices in ascending order.
pub fn sample_without_replacement<R: Rng>(weights: &[f64], k: usize, rng: &mut R) -> Vec<usize> {
    if k >= weights.len() {
        return (0..weights.len()).collect();
    }
    // key = ln(u)/w; the k largest keys form the sample.
    let mut keys: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k > 0 {
        keys.select_nth_unstable_by(k - 1, cmp);
    }
    let mut chosen: Vec<usize> = keys[..k].iter().map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    chosen
}

/// `draws` independent categorical draws from `probabilities`.
pub fn sample_with_replacement<R: Rng>(probabilities: &[f64], draws: usize, rng: &mut R) -> Vec<usize> {
    let dist = WeightedIndex::new(probabilities).expect("valid probability vector");
    (0..draws).map(|_| dist.sample(rng)).collect()
}

/// Importance-sampled interior points.
///
/// `candidates` must already be filtered by occupancy. Weights are computed
/// from the distance to the nearest `cluster` point and `n_k` distinct
/// candidates are drawn. With no survivors the result is empty.
pub fn mcis_fill<R: Rng>(
    candidates: &mut CandidateSet,
    cluster: &[Vec3],
    sigma: f64,
    n_k: usize,
    rng: &mut R,
) -> Vec<Vec3> {
    if candidates.is_empty() {
        if n_k > 0 {
            log::warn!("no candidates survived occupancy filtering; nothing to fill");
        }
        return Vec::new();
    }
    candidates.weigh(cluster, sigma);
    sample_without_replacement(&candidates.weights, n_k, rng).into_iter().map(|i| candidates.points[i]).collect()
}
