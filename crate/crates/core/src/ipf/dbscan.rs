use super::IpfError;
use crate::pointset::NOISE;
use crate::Vec3;
use std::collections::HashMap;

/// Instance clustering of a point array.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    /// Per-point label, `NOISE` for unclustered points.
    pub labels: Vec<i32>,
    /// Point indices per cluster, ascending; cluster `k` carries label `k`.
    pub clusters: Vec<Vec<usize>>,
    pub radius: f64,
}

impl ClusterResult {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    pub fn noise(&self) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == NOISE).map(|(i, _)| i).collect()
    }
}

/// Uniform hash grid over points for fixed-radius queries.
pub(crate) struct HashGrid {
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl HashGrid {
    pub(crate) fn new(points: &[Vec3], cell: f64) -> Self {
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_of(p, cell)).or_default().push(i as u32);
        }
        Self { cell, cells }
    }

    fn key_of(p: &Vec3, cell: f64) -> [i64; 3] {
        [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64]
    }

    /// Calls `f` with every point index in the 3x3x3 block of cells around `p`.
    pub(crate) fn for_each_near(&self, p: &Vec3, mut f: impl FnMut(usize)) {
        let k = Self::key_of(p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        for &i in ids {
                            f(i as usize);
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn cell(&self) -> f64 {
        self.cell
    }
}

/// Density-based clustering with neighborhood radius `r`.
///
/// A point is a core point when at least `min_pts` points (itself included)
/// lie within distance `r`. Core points within `r` of each other share a
/// cluster. A non-core point within `r` of a core point joins the cluster of
/// its lowest-index core neighbor, which makes the labeling independent of
/// traversal order. Clusters are numbered by their lowest core index.
pub fn dbscan(points: &[Vec3], r: f64, min_pts: usize) -> Result<ClusterResult, IpfError> {
    if points.is_empty() {
        return Err(IpfError::EmptyInput);
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(IpfError::InvalidParam(format!("dbscan radius must be positive, got {r}")));
    }
    if min_pts == 0 {
        return Err(IpfError::InvalidParam("min_pts must be at least 1".into()));
    }
    let n = points.len();
    let grid = HashGrid::new(points, r);
    let r2 = r * r;
    let mut neighbors: Vec<Vec<u32>> = Vec::with_capacity(n);
    for p in points {
        let mut list = Vec::new();
        grid.for_each_near(p, |j| {
            if (points[j] - p).norm_squared() <= r2 {
                list.push(j as u32);
            }
        });
        list.sort_unstable();
        neighbors.push(list);
    }
    let core: Vec<bool> = neighbors.iter().map(|l| l.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut next = 0i32;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        labels[seed] = next;
        stack.push(seed);
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                let q = q as usize;
                if core[q] && labels[q] == NOISE {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    for p in 0..n {
        if core[p] {
            continue;
        }
        if let Some(&q) = neighbors[p].iter().find(|&&q| core[q as usize]) {
            labels[p] = labels[q as usize];
        }
    }
    let mut clusters = vec![Vec::new(); next as usize];
    for (i, &l) in labels.iter().enumerate() {
        if l != NOISE {
            clusters[l as usize].push(i);
        }
    }
    Ok(ClusterResult { labels, clusters, radius: r })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(center: Vec3, n: usize, spread: f64) -> Vec<Vec3> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                center + spread * Vec3::new((t * 0.37).sin(), (t * 0.73).cos(), (t * 1.31).sin())
            })
            .collect()
    }

    #[test]
    fn two_blobs() {
        let r = 0.05;
        let mut pts = blob(Vec3::new(0.2, 0.2, 0.2), 100, 0.03);
        pts.extend(blob(Vec3::new(0.2 + 10.0 * r, 0.2, 0.2), 100, 0.03));
        let c = dbscan(&pts, r, 5).unwrap();
        assert_eq!(c.count(), 2);
        assert!(c.labels[..100].iter().all(|&l| l == 0));
        assert!(c.labels[100..].iter().all(|&l| l == 1));
    }

    #[test]
    fn one_dense_blob_has_no_noise() {
        let pts = blob(Vec3::new(0.5, 0.5, 0.5), 200, 0.02);
        let c = dbscan(&pts, 0.05, 10).unwrap();
        assert_eq!(c.count(), 1);
        assert!(c.noise().is_empty());
    }

    #[test]
    fn errors() {
        assert_eq!(dbscan(&[], 0.1, 3), Err(IpfError::EmptyInput));
        assert!(dbscan(&[Vec3::zeros()], 0.0, 3).is_err());
        assert!(dbscan(&[Vec3::zeros()], 0.1, 0).is_err());
    }

    #[test]
    fn isolated_point_is_noise() {
        let mut pts = blob(Vec3::new(0.5, 0.5, 0.5), 50, 0.01);
        pts.push(Vec3::new(0.9, 0.9, 0.9));
        let c = dbscan(&pts, 0.05, 5).unwrap();
        assert_eq!(c.labels[50], NOISE);
        assert_eq!(c.noise(), vec![50]);
    }
}
