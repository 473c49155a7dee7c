//! Splat point clouds, instance labels and their PLY representation.
//!
//! Per-point attributes live in index-aligned sidecar arrays rather than in
//! per-point structs so the simulator hot loops never touch them. Filling only
//! ever appends, so a point index keeps its position and label for the whole
//! pipeline.

mod frames;
mod ply;

pub use frames::{frame_file_name, save_frames};
pub use ply::{load_ply, read_ply_table, save_ply, write_ply_table, Column, PlyError, PlyFormat, PlyTable, ScalarType};

use crate::Vec3;
use thiserror::Error;

/// Label value for points that belong to no instance.
pub const NOISE: i32 = -1;

#[derive(Debug, Error, PartialEq)]
pub enum PointSetError {
    #[error("point set is empty")]
    Empty,
    #[error("all points are coincident; bounding box has zero extent")]
    DegenerateExtent,
    #[error("normalization fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("label {label} at index {index} is outside [0, {count}) and is not NOISE")]
    LabelOutOfRange { index: usize, label: i32, count: usize },
    #[error("sidecar length {found} does not match point count {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// One ingested splat center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplatPoint {
    pub position: Vec3,
    pub opacity: f64,
    pub is_filled: bool,
}

/// How the `opacity` column was encoded in the source file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OpacityEncoding {
    /// Plain opacity in [0, 1].
    #[default]
    Linear,
    /// Pre-sigmoid logits, as written by most splat trainers.
    Logit,
}

/// Extra per-point properties carried through untouched (spherical harmonics,
/// scales, rotations, ...).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Payload {
    pub columns: Vec<Column>,
}

/// An immutable set of splat points with sidecar attributes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    positions: Vec<Vec3>,
    opacity: Vec<f64>,
    is_filled: Vec<bool>,
    payload: Payload,
    opacity_encoding: OpacityEncoding,
}

impl PointSet {
    /// Fully opaque, unfilled points.
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        let n = positions.len();
        Self {
            positions,
            opacity: vec![1.0; n],
            is_filled: vec![false; n],
            payload: Payload::default(),
            opacity_encoding: OpacityEncoding::Linear,
        }
    }

    pub fn from_points(points: &[SplatPoint]) -> Self {
        let mut set = Self::from_positions(points.iter().map(|p| p.position).collect());
        for (i, p) in points.iter().enumerate() {
            set.is_filled[i] = p.is_filled;
            set.opacity[i] = if p.is_filled { 0.0 } else { p.opacity.clamp(0.0, 1.0) };
        }
        set
    }

    pub(crate) fn from_parts(
        positions: Vec<Vec3>,
        opacity: Vec<f64>,
        is_filled: Vec<bool>,
        payload: Payload,
        opacity_encoding: OpacityEncoding,
    ) -> Self {
        Self { positions, opacity, is_filled, payload, opacity_encoding }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn opacity(&self) -> &[f64] {
        &self.opacity
    }

    pub fn is_filled(&self) -> &[bool] {
        &self.is_filled
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn opacity_encoding(&self) -> OpacityEncoding {
        self.opacity_encoding
    }

    pub fn point(&self, i: usize) -> SplatPoint {
        SplatPoint { position: self.positions[i], opacity: self.opacity[i], is_filled: self.is_filled[i] }
    }

    pub fn filled_count(&self) -> usize {
        self.is_filled.iter().filter(|&&f| f).count()
    }

    /// Returns a new set with `filled` appended as interior points. Appended
    /// points carry opacity 0 and zeroed payload values; existing indices are
    /// untouched.
    pub fn with_filled(&self, filled: &[Vec3]) -> Self {
        let mut out = self.clone();
        out.positions.extend_from_slice(filled);
        out.opacity.extend(std::iter::repeat_n(0.0, filled.len()));
        out.is_filled.extend(std::iter::repeat_n(true, filled.len()));
        for col in &mut out.payload.columns {
            col.data.extend(std::iter::repeat_n(0.0, filled.len()));
        }
        out
    }

    /// Same attributes, new positions (e.g. after a frame of simulation).
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self, PointSetError> {
        if positions.len() != self.len() {
            return Err(PointSetError::LengthMismatch { expected: self.len(), found: positions.len() });
        }
        let mut out = self.clone();
        out.positions = positions;
        Ok(out)
    }

    /// Axis-aligned bounds `(min, max)`; `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        bounds_of(&self.positions)
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
}

/// Instance id per particle, index-aligned with the particle array.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelStore {
    labels: Vec<i32>,
    count: usize,
}

impl LabelStore {
    pub fn new(labels: Vec<i32>, count: usize) -> Result<Self, PointSetError> {
        for (index, &label) in labels.iter().enumerate() {
            if label != NOISE && (label < 0 || label as usize >= count) {
                return Err(PointSetError::LabelOutOfRange { index, label, count });
            }
        }
        Ok(Self { labels, count })
    }

    /// Builds a store whose instance count is one past the largest label.
    pub fn from_labels(labels: Vec<i32>) -> Result<Self, PointSetError> {
        let count = labels.iter().copied().filter(|&l| l >= 0).max().map_or(0, |m| m as usize + 1);
        Self::new(labels, count)
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> i32 {
        self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of instances K.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Appends `n` particles belonging to `label`.
    pub fn extend_with(&mut self, label: i32, n: usize) -> Result<(), PointSetError> {
        if label != NOISE && (label < 0 || label as usize >= self.count) {
            return Err(PointSetError::LabelOutOfRange { index: self.labels.len(), label, count: self.count });
        }
        self.labels.extend(std::iter::repeat_n(label, n));
        Ok(())
    }

    /// Indices of every particle carrying `label`.
    pub fn indices_of(&self, label: i32) -> Vec<usize> {
        self.labels.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| i).collect()
    }
}

/// Uniform scale + translation into the simulation cube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitCubeTransform {
    /// Centroid of the source points.
    pub source_center: Vec3,
    /// Where the centroid lands, (0.5, 0.5, 0.5).
    pub target_center: Vec3,
    pub scale: f64,
}

impl UnitCubeTransform {
    pub fn identity() -> Self {
        Self { source_center: Vec3::repeat(0.5), target_center: Vec3::repeat(0.5), scale: 1.0 }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.source_center) * self.scale + self.target_center
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        (p - self.target_center) / self.scale + self.source_center
    }
}

/// Maps the centroid to (0.5, 0.5, 0.5) and the largest bounding-box extent to
/// `fraction` of the unit cube.
pub fn normalize_to_unit_cube(
    points: &PointSet,
    fraction: f64,
) -> Result<(PointSet, UnitCubeTransform), PointSetError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PointSetError::BadFraction(fraction));
    }
    let (lo, hi) = points.bounds().ok_or(PointSetError::Empty)?;
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(PointSetError::DegenerateExtent);
    }
    let centroid = points.positions().iter().sum::<Vec3>() / points.len() as f64;
    let transform =
        UnitCubeTransform { source_center: centroid, target_center: Vec3::repeat(0.5), scale: fraction / extent };
    let moved = points.positions().iter().map(|p| transform.apply(p)).collect();
    Ok((points.with_positions(moved)?, transform))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_unit_extent_is_identity() {
        let pts = PointSet::from_positions(vec![
            Vec3::new(0.1, 0.5, 0.5),
            Vec3::new(0.9, 0.5, 0.5),
            Vec3::new(0.5, 0.3, 0.5),
            Vec3::new(0.5, 0.7, 0.5),
        ]);
        let (out, t) = normalize_to_unit_cube(&pts, 0.8).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(t.source_center, Vec3::repeat(0.5));
        for (a, b) in out.positions().iter().zip(pts.positions()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn line_scales_uniformly() {
        let pts = PointSet::from_positions((0..5).map(|i| Vec3::new(2.0 * i as f64, 1.0, -3.0)).collect());
        let (out, t) = normalize_to_unit_cube(&pts, 0.8).unwrap();
        assert!((t.scale - 0.8 / 8.0).abs() < 1e-15);
        let (lo, hi) = out.bounds().unwrap();
        assert!(((hi - lo).x - 0.8).abs() < 1e-12);
        assert_eq!((hi - lo).y, 0.0);
        assert!((out.positions()[2] - Vec3::repeat(0.5)).norm() < 1e-12);
    }

    #[test]
    fn apply_then_invert_round_trips() {
        let pts = PointSet::from_positions(vec![
            Vec3::new(-3.0, 12.0, 0.25),
            Vec3::new(7.5, -1.0, 4.0),
            Vec3::new(1.0, 1.0, 1.0),
        ]);
        let (out, t) = normalize_to_unit_cube(&pts, 0.8).unwrap();
        for (a, b) in out.positions().iter().zip(pts.positions()) {
            assert!((t.invert(a) - b).abs().max() < 1e-12);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let pts = PointSet::from_positions(vec![Vec3::new(1.0, 2.0, 3.0); 4]);
        assert_eq!(normalize_to_unit_cube(&pts, 0.8).unwrap_err(), PointSetError::DegenerateExtent);
        assert_eq!(normalize_to_unit_cube(&PointSet::default(), 0.8).unwrap_err(), PointSetError::Empty);
    }

    #[test]
    fn appending_keeps_existing_indices() {
        let pts = PointSet::from_positions(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        let mut labels = LabelStore::new(vec![0, 1], 2).unwrap();
        let filled = pts.with_filled(&[Vec3::new(0.5, 0.5, 0.5)]);
        labels.extend_with(1, 1).unwrap();
        assert_eq!(&filled.positions()[..2], pts.positions());
        assert_eq!(filled.len(), labels.len());
        assert_eq!(labels.labels(), &[0, 1, 1]);
        assert!(filled.is_filled()[2]);
        assert_eq!(filled.opacity()[2], 0.0);
    }

    #[test]
    fn label_range_is_checked() {
        assert!(LabelStore::new(vec![0, 2], 2).is_err());
        assert!(LabelStore::new(vec![0, NOISE, 1], 2).is_ok());
        let mut store = LabelStore::new(vec![0], 1).unwrap();
        assert!(store.extend_with(3, 2).is_err());
        assert_eq!(store.len(), 1);
    }
}
