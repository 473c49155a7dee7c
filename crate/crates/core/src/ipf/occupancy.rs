use super::ConvexHull;
use crate::Vec3;

/// Barycentric distance to a triangle edge below which a hit is ambiguous.
const EDGE_TOL: f64 = 1e-9;
/// Origin displacement for re-cast rays.
const JITTER: f64 = 1e-7;
const RETRIES: usize = 3;

const DIRECTIONS: [Vec3; 6] = [
    Vec3::new(1.0, 0.0, 0.0),
    Vec3::new(-1.0, 0.0, 0.0),
    Vec3::new(0.0, 1.0, 0.0),
    Vec3::new(0.0, -1.0, 0.0),
    Vec3::new(0.0, 0.0, 1.0),
    Vec3::new(0.0, 0.0, -1.0),
];

// Fixed, non-axis-aligned offsets so a retry leaves the degenerate feature.
const JITTERS: [Vec3; RETRIES] =
    [Vec3::new(0.5773, -0.3121, 0.7547), Vec3::new(-0.6614, 0.7011, 0.2667), Vec3::new(0.1903, 0.4472, -0.8740)];

enum Cast {
    Parity(bool),
    Ambiguous,
}

/// Crossing parity of the ray `origin + t·dir`, `t > 0`.
fn cast(origin: &Vec3, dir: &Vec3, hull: &ConvexHull) -> Cast {
    let mut crossings = 0usize;
    for f in &hull.faces {
        let [a, b, c] = f.map(|i| hull.vertices[i]);
        let e1 = b - a;
        let e2 = c - a;
        let pv = dir.cross(&e2);
        let det = e1.dot(&pv);
        let s = origin - a;
        let scale = e1.norm() * e2.norm();
        if det.abs() <= 1e-14 * scale {
            // Ray parallel to the triangle: only a problem when it lies in its plane.
            let n = e1.cross(&e2);
            if n.dot(&s).abs() <= EDGE_TOL * scale.sqrt() * n.norm() {
                let (u, v) = planar_coords(&s, &e1, &e2);
                if u >= -EDGE_TOL && v >= -EDGE_TOL && u + v <= 1.0 + EDGE_TOL {
                    return Cast::Ambiguous;
                }
            }
            continue;
        }
        let inv = 1.0 / det;
        let u = s.dot(&pv) * inv;
        if !(-EDGE_TOL..=1.0 + EDGE_TOL).contains(&u) {
            continue;
        }
        let qv = s.cross(&e1);
        let v = dir.dot(&qv) * inv;
        if v < -EDGE_TOL || u + v > 1.0 + EDGE_TOL {
            continue;
        }
        let t = e2.dot(&qv) * inv;
        if t <= 0.0 {
            continue;
        }
        if u <= EDGE_TOL || v <= EDGE_TOL || u + v >= 1.0 - EDGE_TOL {
            return Cast::Ambiguous;
        }
        crossings += 1;
    }
    Cast::Parity(crossings % 2 == 1)
}

fn planar_coords(s: &Vec3, e1: &Vec3, e2: &Vec3) -> (f64, f64) {
    let (a, b, c) = (e1.dot(e1), e1.dot(e2), e2.dot(e2));
    let (d, e) = (e1.dot(s), e2.dot(s));
    let den = a * c - b * b;
    ((c * d - b * e) / den, (a * e - b * d) / den)
}

/// One ray's inside vote, re-cast from jittered origins when the ray grazes
/// an edge or vertex.
fn vote(q: &Vec3, dir: &Vec3, hull: &ConvexHull) -> bool {
    if let Cast::Parity(p) = cast(q, dir, hull) {
        return p;
    }
    let (mut inside, mut decided) = (0, 0);
    for j in &JITTERS {
        if let Cast::Parity(p) = cast(&(q + j * JITTER), dir, hull) {
            decided += 1;
            inside += p as usize;
        }
    }
    decided > 0 && 2 * inside > decided
}

/// Fraction of the six axis-aligned rays from `q` that cross the hull an odd
/// number of times.
pub fn occupancy(q: &Vec3, hull: &ConvexHull) -> f64 {
    let (lo, hi) = hull.aabb();
    if (0..3).any(|a| q[a] < lo[a] || q[a] > hi[a]) {
        return 0.0;
    }
    let inside = DIRECTIONS.iter().filter(|d| vote(q, d, hull)).count();
    inside as f64 / DIRECTIONS.len() as f64
}
