//! Procedural desk-scale scenes in simulation coordinates.

use crate::constitutive::{Elasticity, Plasticity};
use crate::Vec3;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use super::config::MaterialEntry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Surface shell of a cube.
    HollowCube,
    /// Two separated shells: a cube and a sphere.
    ShellPair,
    /// Flat mat lying over a deep, thick-walled open box.
    MatOverBox,
    /// Solid lattice cube (no filling needed) used for modulus calibration.
    CubeDrop,
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub kind: SceneKind,
    pub points: Vec<Vec3>,
    /// Instance each generator part belongs to, in generation order.
    pub expected_labels: Vec<i32>,
    /// Suggested materials, one per instance.
    pub materials: Vec<MaterialEntry>,
    /// The empty interior of the open box (mat scene only).
    pub cavity: Option<Aabb>,
}

/// Surface spacing of generated points; well below the default clustering
/// radius so each part is one connected instance.
pub const SPACING: f64 = 0.015;

fn grid_steps(len: f64) -> usize {
    (len / SPACING).ceil().max(1.0) as usize
}

/// Points on the six faces of the box `[lo, hi]`, optionally leaving out the
/// top face.
fn box_surface(lo: Vec3, hi: Vec3, top: bool) -> Vec<Vec3> {
    let ext = hi - lo;
    let n = [grid_steps(ext.x), grid_steps(ext.y), grid_steps(ext.z)];
    let mut pts = Vec::new();
    for i in 0..=n[0] {
        for j in 0..=n[1] {
            for k in 0..=n[2] {
                let on = i == 0 || i == n[0] || j == 0 || j == n[1] || k == 0 || (k == n[2] && top);
                if on {
                    let t = Vec3::new(i as f64 / n[0] as f64, j as f64 / n[1] as f64, k as f64 / n[2] as f64);
                    pts.push(lo + ext.component_mul(&t));
                }
            }
        }
    }
    pts
}

/// Points on a sphere by the golden-angle spiral.
fn sphere_surface(center: Vec3, radius: f64) -> Vec<Vec3> {
    let area = 4.0 * std::f64::consts::PI * radius * radius;
    let n = (area / (SPACING * SPACING)).ceil() as usize;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            center + radius * Vec3::new(r * th.cos(), r * th.sin(), z)
        })
        .collect()
}

fn jelly(label: i32) -> MaterialEntry {
    MaterialEntry {
        elasticity: Some(Elasticity::Corotated),
        plasticity: Some(Plasticity::Identity),
        density: Some(1000.0),
        poisson: Some(0.3),
        young: Some(5e4),
        ..MaterialEntry::new(label)
    }
}

/// Material of the calibration cube. The density is high so that the stiff
/// corrupted moduli stay within a desk-scale substep budget.
pub fn cube_drop_material(young: f64) -> MaterialEntry {
    MaterialEntry {
        elasticity: Some(Elasticity::Corotated),
        plasticity: Some(Plasticity::Identity),
        density: Some(4e6),
        poisson: Some(0.3),
        young: Some(young),
        ..MaterialEntry::new(0)
    }
}

/// Lattice points of the calibration cube: 17³ = 4913 particles, side 0.3,
/// bottom at z = 0.25.
pub fn cube_drop_points() -> Vec<Vec3> {
    let n = 17;
    let h = 0.3 / (n - 1) as f64;
    let mut pos = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                pos.push(Vec3::new(0.35 + i as f64 * h, 0.35 + j as f64 * h, 0.25 + k as f64 * h));
            }
        }
    }
    pos
}

/// Wall thickness of the open box.
pub const BOX_WALL: f64 = 0.15;

pub fn generate(kind: SceneKind) -> Scene {
    match kind {
        SceneKind::HollowCube => {
            let points = box_surface(Vec3::new(0.4, 0.4, 0.3), Vec3::new(0.6, 0.6, 0.5), true);
            let n = points.len();
            Scene { kind, points, expected_labels: vec![0; n], materials: vec![jelly(0)], cavity: None }
        }
        SceneKind::ShellPair => {
            let mut points = box_surface(Vec3::new(0.2, 0.4, 0.2), Vec3::new(0.4, 0.6, 0.4), true);
            let a = points.len();
            points.extend(sphere_surface(Vec3::new(0.7, 0.5, 0.35), 0.12));
            let mut expected_labels = vec![0; a];
            expected_labels.resize(points.len(), 1);
            Scene { kind, points, expected_labels, materials: vec![jelly(0), jelly(1)], cavity: None }
        }
        SceneKind::MatOverBox => {
            // Only surfaces visible with the mat in place: outer walls,
            // outer bottom and the rim. The mat hides the inner walls.
            // Weight leaking from the rim's inner edge into the cavity scales
            // with σ·(edge length)/(observed area), so the box is deep and
            // the opening narrow.
            let lo = Vec3::new(0.25, 0.25, 0.1);
            let hi = Vec3::new(0.75, 0.75, 0.7);
            let mut points = box_surface(lo, hi, false);
            let inner_lo = Vec3::new(lo.x + BOX_WALL, lo.y + BOX_WALL, lo.z + BOX_WALL);
            let inner_hi = Vec3::new(hi.x - BOX_WALL, hi.y - BOX_WALL, hi.z);
            let n = grid_steps(hi.x - lo.x);
            for i in 0..=n {
                for j in 0..=n {
                    let p = Vec3::new(
                        lo.x + (hi.x - lo.x) * i as f64 / n as f64,
                        lo.y + (hi.y - lo.y) * j as f64 / n as f64,
                        hi.z,
                    );
                    let in_opening = p.x > inner_lo.x && p.x < inner_hi.x && p.y > inner_lo.y && p.y < inner_hi.y;
                    if !in_opening {
                        points.push(p);
                    }
                }
            }
            let a = points.len();
            // Single-layer mat, 0.07 above the rim, wider than the box.
            let m = grid_steps(0.6);
            for i in 0..=m {
                for j in 0..=m {
                    points.push(Vec3::new(0.2 + 0.6 * i as f64 / m as f64, 0.2 + 0.6 * j as f64 / m as f64, 0.77));
                }
            }
            let mut expected_labels = vec![0; a];
            expected_labels.resize(points.len(), 1);
            let mat = MaterialEntry {
                elasticity: Some(Elasticity::NeoHookean),
                plasticity: Some(Plasticity::Identity),
                density: Some(500.0),
                poisson: Some(0.3),
                young: Some(2e4),
                ..MaterialEntry::new(1)
            };
            Scene {
                kind,
                points,
                expected_labels,
                materials: vec![jelly(0), mat],
                cavity: Some(Aabb { min: inner_lo, max: inner_hi }),
            }
        }
        SceneKind::CubeDrop => {
            let points = cube_drop_points();
            let n = points.len();
            Scene { kind, points, expected_labels: vec![0; n], materials: vec![cube_drop_material(1e5)], cavity: None }
        }
    }
}
