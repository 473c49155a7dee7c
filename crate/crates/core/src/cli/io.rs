//! Snapshot, run-info and material files.

use super::config::MaterialEntry;
use crate::mpm::{FrameSnapshot, MaterialSet, ParticleAttrs};
use crate::pointset::{read_ply_table, write_ply_table, Column, PlyError, PlyFormat, PlyTable, ScalarType};
use crate::{Mat3, Vec3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const MAT_NAMES: [&str; 9] = ["00", "01", "02", "10", "11", "12", "20", "21", "22"];

pub fn snapshot_file_name(frame: usize) -> String {
    format!("snapshot_{frame:04}.ply")
}

/// Full-precision PLY with `{x, v, C, F}`, label, mass and initial volume.
pub fn save_snapshot(path: &Path, snap: &FrameSnapshot) -> Result<(), PlyError> {
    let f64col = |name: String, data: Vec<f64>| Column::new(name, ScalarType::F64, data);
    let mut columns = Vec::new();
    for (prefix, vecs) in [("", &snap.x), ("v", &snap.v)] {
        for (a, axis) in ["x", "y", "z"].iter().enumerate() {
            columns.push(f64col(format!("{prefix}{axis}"), vecs.iter().map(|p| p[a]).collect()));
        }
    }
    for (prefix, mats) in [("c", &snap.c), ("f", &snap.f)] {
        for (k, suffix) in MAT_NAMES.iter().enumerate() {
            columns.push(f64col(format!("{prefix}{suffix}"), mats.iter().map(|m| m[(k / 3, k % 3)]).collect()));
        }
    }
    columns.push(Column::new("label", ScalarType::I32, snap.attrs.label.iter().map(|&l| l as f64).collect()));
    columns.push(f64col("mass".into(), snap.attrs.mass.clone()));
    columns.push(f64col("vol0".into(), snap.attrs.vol0.clone()));
    let table = PlyTable { columns, comments: vec![format!("frame {}", snap.frame)] };
    write_ply_table(path, &table, PlyFormat::BinaryLittleEndian)
}

pub fn load_snapshot(path: &Path) -> Result<FrameSnapshot, PlyError> {
    let table = read_ply_table(path)?;
    let col = |name: &'static str| table.column(name).map(|c| &c.data).ok_or(PlyError::MissingProperty(name));
    let frame = table
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("frame ").and_then(|s| s.trim().parse().ok()))
        .ok_or_else(|| PlyError::parse(0, "snapshot has no `frame` comment"))?;
    let vec3 = |n: [&'static str; 3]| -> Result<Vec<Vec3>, PlyError> {
        let (a, b, c) = (col(n[0])?, col(n[1])?, col(n[2])?);
        Ok((0..a.len()).map(|i| Vec3::new(a[i], b[i], c[i])).collect())
    };
    const C: [&str; 9] = ["c00", "c01", "c02", "c10", "c11", "c12", "c20", "c21", "c22"];
    const F: [&str; 9] = ["f00", "f01", "f02", "f10", "f11", "f12", "f20", "f21", "f22"];
    let mat3 = |names: [&'static str; 9]| -> Result<Vec<Mat3>, PlyError> {
        let cols = names.map(col);
        let cols: Vec<&Vec<f64>> = cols.into_iter().collect::<Result<_, _>>()?;
        Ok((0..cols[0].len()).map(|i| Mat3::from_fn(|r, c| cols[r * 3 + c][i])).collect())
    };
    Ok(FrameSnapshot {
        frame,
        x: vec3(["x", "y", "z"])?,
        v: vec3(["vx", "vy", "vz"])?,
        c: mat3(C)?,
        f: mat3(F)?,
        attrs: Arc::new(ParticleAttrs {
            mass: col("mass")?.clone(),
            vol0: col("vol0")?.clone(),
            label: col("label")?.iter().map(|&l| l as i32).collect(),
        }),
    })
}

/// Facts about a forward run that the calibration step needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub dt: f64,
    pub substeps: usize,
    pub snapshot_frames: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct MaterialsFile {
    materials: Vec<MaterialEntry>,
}

pub fn materials_to_toml(set: &MaterialSet) -> String {
    let file = MaterialsFile { materials: set.iter().map(MaterialEntry::from_params).collect() };
    toml::to_string(&file).expect("materials serialize")
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = PathBuf::from(path);
    tmp.as_mut_os_string().push(".tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}
