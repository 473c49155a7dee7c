//! Per-frame particle export.

use super::ply::{write_ply_table, Column, PlyError, PlyFormat, PlyTable, ScalarType};
use crate::Vec3;
use std::fs;
use std::path::{Path, PathBuf};

/// `frame_007.ply` style name, padded to at least three digits and to the
/// width of the largest index in the sequence.
pub fn frame_file_name(index: usize, total: usize) -> String {
    let width = total.saturating_sub(1).to_string().len().max(3);
    format!("frame_{index:0width$}.ply")
}

/// Writes one PLY per frame with positions, labels, `is_filled` and opacity
/// (0 for filled particles, 1 otherwise).
///
/// Frames are staged in a hidden directory inside `dir` and moved into place
/// only after every file was written, so a failure leaves no frame files.
pub fn save_frames(
    frames: &[Vec<Vec3>],
    labels: &[i32],
    is_filled: &[bool],
    dir: &Path,
    format: PlyFormat,
) -> Result<Vec<PathBuf>, PlyError> {
    if frames.is_empty() {
        return Ok(Vec::new());
    }
    let io = |e| PlyError::Io { path: dir.display().to_string(), source: e };
    fs::create_dir_all(dir).map_err(io)?;
    let staging = dir.join(format!(".frames-staging-{}", std::process::id()));
    fs::create_dir_all(&staging).map_err(io)?;

    let opacity: Vec<f64> = is_filled.iter().map(|&f| if f { 0.0 } else { 1.0 }).collect();
    let filled: Vec<f64> = is_filled.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let label_col: Vec<f64> = labels.iter().map(|&l| l as f64).collect();

    let staged = (|| {
        let mut names = Vec::with_capacity(frames.len());
        for (i, pos) in frames.iter().enumerate() {
            let n = pos.len();
            for (name, len) in [("label", labels.len()), ("is_filled", is_filled.len())] {
                if len != n {
                    return Err(PlyError::ColumnLength { name: name.into(), expected: n, found: len });
                }
            }
            let table = PlyTable {
                columns: vec![
                    Column::new("x", ScalarType::F32, pos.iter().map(|p| p.x).collect()),
                    Column::new("y", ScalarType::F32, pos.iter().map(|p| p.y).collect()),
                    Column::new("z", ScalarType::F32, pos.iter().map(|p| p.z).collect()),
                    Column::new("opacity", ScalarType::F32, opacity.clone()),
                    Column::new("label", ScalarType::I32, label_col.clone()),
                    Column::new("is_filled", ScalarType::U8, filled.clone()),
                ],
                comments: Vec::new(),
            };
            let name = frame_file_name(i, frames.len());
            write_ply_table(&staging.join(&name), &table, format)?;
            names.push(name);
        }
        Ok(names)
    })();

    let names = match staged {
        Ok(names) => names,
        Err(e) => {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
    };
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let target = dir.join(&name);
        fs::rename(staging.join(&name), &target).map_err(io)?;
        out.push(target);
    }
    let _ = fs::remove_dir_all(&staging);
    Ok(out)
}
