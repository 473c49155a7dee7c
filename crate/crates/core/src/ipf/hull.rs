use super::IpfError;
use crate::pointset::bounds_of;
use crate::Vec3;
use std::collections::HashMap;

/// Closed triangulated convex hull with outward normals.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexHull {
    /// Hull vertices; a subset of the input points.
    pub vertices: Vec<Vec3>,
    /// Index of each vertex in the input array.
    pub source: Vec<usize>,
    /// Counter-clockwise triangles seen from outside, indexing `vertices`.
    pub faces: Vec<[usize; 3]>,
    /// Unit outward normal per face.
    pub normals: Vec<Vec3>,
    /// Plane offset per face: `n · x = offset` on the face.
    pub offsets: Vec<f64>,
    /// Tolerance used while building the hull.
    pub eps: f64,
}

impl ConvexHull {
    /// Signed distance of `q` to the plane of face `f`, positive outside.
    pub fn plane_distance(&self, f: usize, q: &Vec3) -> f64 {
        self.normals[f].dot(q) - self.offsets[f]
    }

    /// Largest signed plane distance; `≤ 0` means inside under exact
    /// half-space inclusion.
    pub fn max_plane_distance(&self, q: &Vec3) -> f64 {
        (0..self.faces.len()).map(|f| self.plane_distance(f, q)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Half-space inclusion with tolerance `tol`.
    pub fn contains(&self, q: &Vec3, tol: f64) -> bool {
        self.max_plane_distance(q) <= tol
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        bounds_of(&self.vertices).expect("hull has vertices")
    }

    pub fn volume(&self) -> f64 {
        let o = self.vertices[0];
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i] - o);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn centroid(&self) -> Vec3 {
        self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64
    }

    /// Every directed edge appears once and its reverse appears once.
    pub fn is_watertight(&self) -> bool {
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for e in 0..3 {
                *edges.entry((f[e], f[(e + 1) % 3])).or_default() += 1;
            }
        }
        edges.iter().all(|(&(a, b), &n)| n == 1 && edges.get(&(b, a)) == Some(&1))
    }
}

struct Face {
    v: [usize; 3],
    normal: Vec3,
    offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Face {
    fn new(points: &[Vec3], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i]);
        let normal = (b - a).cross(&(c - a)).normalize();
        Face { v, normal, offset: normal.dot(&a), outside: Vec::new(), alive: true }
    }

    fn distance(&self, q: &Vec3) -> f64 {
        self.normal.dot(q) - self.offset
    }
}

/// 3D Quickhull.
///
/// Points within `1e-10 ×` the bounding-box diagonal of a face plane count as
/// on the hull and are not added as vertices. Fewer than four points, or
/// collinear or coplanar input, is a degenerate-geometry error.
pub fn quickhull(points: &[Vec3]) -> Result<ConvexHull, IpfError> {
    if points.len() < 4 {
        return Err(IpfError::DegenerateHull(format!("{} points, need at least 4", points.len())));
    }
    let (lo, hi) = bounds_of(points).expect("non-empty");
    let diag = (hi - lo).norm();
    let eps = 1e-10 * diag.max(f64::MIN_POSITIVE);
    if diag == 0.0 {
        return Err(IpfError::DegenerateHull("all points coincide".into()));
    }

    let simplex = initial_simplex(points, eps)?;
    let mut faces: Vec<Face> = Vec::new();
    let [a, b, c, d] = simplex;
    for tri in [[a, b, c], [a, c, d], [a, d, b], [b, d, c]] {
        let f = Face::new(points, tri);
        faces.push(f);
    }
    // Orient outward relative to the simplex centroid.
    let inner = simplex.iter().map(|&i| points[i]).sum::<Vec3>() / 4.0;
    if faces[0].distance(&inner) > 0.0 {
        for f in &mut faces {
            f.v.swap(1, 2);
            let nf = Face::new(points, f.v);
            f.normal = nf.normal;
            f.offset = nf.offset;
        }
    }
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for e in 0..3 {
            edges.insert((f.v[e], f.v[(e + 1) % 3]), fi);
        }
    }
    for (i, p) in points.iter().enumerate() {
        if simplex.contains(&i) {
            continue;
        }
        assign(&mut faces, 0..4, i, p, eps);
    }

    let mut pending: Vec<usize> = (0..faces.len()).filter(|&f| !faces[f].outside.is_empty()).collect();
    let mut visible = Vec::new();
    let mut horizon = Vec::new();
    let mut orphans = Vec::new();
    while let Some(fi) = pending.pop() {
        if !faces[fi].alive || faces[fi].outside.is_empty() {
            continue;
        }
        let apex = *faces[fi]
            .outside
            .iter()
            .max_by(|&&x, &&y| {
                faces[fi].distance(&points[x]).total_cmp(&faces[fi].distance(&points[y])).then(y.cmp(&x))
            })
            .expect("non-empty outside set");
        let ap = points[apex];

        // Flood the visible region from `fi` across shared edges.
        visible.clear();
        visible.push(fi);
        faces[fi].alive = false;
        let mut k = 0;
        while k < visible.len() {
            let v = faces[visible[k]].v;
            for e in 0..3 {
                let nb = edges[&(v[(e + 1) % 3], v[e])];
                if faces[nb].alive && faces[nb].distance(&ap) > eps {
                    faces[nb].alive = false;
                    visible.push(nb);
                }
            }
            k += 1;
        }
        horizon.clear();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                let (s, t) = (v[e], v[(e + 1) % 3]);
                if faces[edges[&(t, s)]].alive {
                    horizon.push((s, t));
                }
            }
        }
        orphans.clear();
        for &f in &visible {
            let v = faces[f].v;
            for e in 0..3 {
                edges.remove(&(v[e], v[(e + 1) % 3]));
            }
            orphans.append(&mut faces[f].outside);
        }
        let first_new = faces.len();
        for &(s, t) in &horizon {
            let f = Face::new(points, [s, t, apex]);
            let id = faces.len();
            edges.insert((s, t), id);
            edges.insert((t, apex), id);
            edges.insert((apex, s), id);
            faces.push(f);
        }
        for &i in &orphans {
            if i != apex {
                let end = faces.len();
                assign(&mut faces, first_new..end, i, &points[i], eps);
            }
        }
        pending.extend((first_new..faces.len()).filter(|&f| !faces[f].outside.is_empty()));
    }

    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut source = Vec::new();
    let mut out_faces = Vec::new();
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for f in faces.iter().filter(|f| f.alive) {
        let tri = f.v.map(|i| {
            *remap.entry(i).or_insert_with(|| {
                vertices.push(points[i]);
                source.push(i);
                vertices.len() - 1
            })
        });
        out_faces.push(tri);
        normals.push(f.normal);
        offsets.push(f.offset);
    }
    Ok(ConvexHull { vertices, source, faces: out_faces, normals, offsets, eps })
}

fn assign(faces: &mut [Face], range: std::ops::Range<usize>, i: usize, p: &Vec3, eps: f64) {
    for f in range {
        if faces[f].alive && faces[f].distance(p) > eps {
            faces[f].outside.push(i);
            return;
        }
    }
}

fn initial_simplex(points: &[Vec3], eps: f64) -> Result<[usize; 4], IpfError> {
    // Extreme points along each axis; the farthest pair seeds the simplex.
    let mut extremes = Vec::new();
    for axis in 0..3 {
        let (mut lo, mut hi) = (0, 0);
        for (i, p) in points.iter().enumerate() {
            if p[axis] < points[lo][axis] {
                lo = i;
            }
            if p[axis] > points[hi][axis] {
                hi = i;
            }
        }
        extremes.push((lo, hi));
    }
    let (a, b) = extremes
        .iter()
        .copied()
        .max_by(|&(l1, h1), &(l2, h2)| (points[h1] - points[l1]).norm().total_cmp(&(points[h2] - points[l2]).norm()))
        .expect("three axes");
    let ab = points[b] - points[a];
    if ab.norm() <= eps {
        return Err(IpfError::DegenerateHull("all points coincide".into()));
    }
    let dir = ab.normalize();
    let line_dist = |p: &Vec3| {
        let w = p - points[a];
        (w - dir * w.dot(&dir)).norm()
    };
    let c =
        (0..points.len()).max_by(|&x, &y| line_dist(&points[x]).total_cmp(&line_dist(&points[y]))).expect("non-empty");
    if line_dist(&points[c]) <= eps {
        return Err(IpfError::DegenerateHull("points are collinear".into()));
    }
    let n = ab.cross(&(points[c] - points[a])).normalize();
    let plane_dist = |p: &Vec3| n.dot(&(p - points[a])).abs();
    let d = (0..points.len())
        .max_by(|&x, &y| plane_dist(&points[x]).total_cmp(&plane_dist(&points[y])))
        .expect("non-empty");
    if plane_dist(&points[d]) <= eps {
        return Err(IpfError::DegenerateHull("points are coplanar".into()));
    }
    Ok([a, b, c, d])
}
