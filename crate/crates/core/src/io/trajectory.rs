//! Trajectory dumps: one PLY per frame with a surface flag plus a JSON
//! manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ply::{read_points_ply, write_points_ply, PlyFormat};
use crate::error::{GicError, Result};
use crate::mpm::{MaterialKind, MaterialSpec, Trajectory};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    pub time: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub frames: Vec<FrameEntry>,
    /// Frame spacing (s).
    pub dt: f64,
    pub material: MaterialKind,
    pub params: MaterialSpec,
}

/// Writes `frame_NNNN.ply` files and `manifest.json` into `dir`.
pub fn save_trajectory(dir: impl AsRef<Path>, traj: &Trajectory, mat: &MaterialSpec, frame_dt: f64) -> Result<TrajectoryManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| GicError::io(dir, e))?;
    let flags = traj.is_surface();
    let mut frames = Vec::with_capacity(traj.frame_count());
    for (k, (t, pos)) in traj.times.iter().zip(&traj.positions).enumerate() {
        let file = format!("frame_{k:04}.ply");
        write_points_ply(dir.join(&file), pos, Some(&flags), PlyFormat::BinaryLittleEndian)?;
        frames.push(FrameEntry { index: k, time: *t, file });
    }
    let manifest = TrajectoryManifest {
        frames,
        dt: frame_dt,
        material: mat.kind,
        params: mat.clone(),
    };
    let path = dir.join(MANIFEST_NAME);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json).map_err(|e| GicError::io(&path, e))?;
    Ok(manifest)
}

/// Reads a dump written by [`save_trajectory`]. Positions come back at
/// `f32` precision.
pub fn load_trajectory(dir: impl AsRef<Path>) -> Result<(Trajectory, TrajectoryManifest)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| GicError::io(&path, e))?;
    let manifest: TrajectoryManifest = serde_json::from_str(&text).map_err(|e| GicError::Parse {
        source_name: path.display().to_string(),
        location: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let mut traj = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        surface: Vec::new(),
    };
    for (k, f) in manifest.frames.iter().enumerate() {
        let (pts, flags) = read_points_ply(dir.join(&f.file))?;
        if k == 0 {
            traj.surface = flags
                .unwrap_or_default()
                .iter()
                .enumerate()
                .filter_map(|(i, &s)| s.then_some(i))
                .collect();
        } else if pts.len() != traj.positions[0].len() {
            return Err(GicError::invalid(format!("{} has {} points, frame 0 has {}", f.file, pts.len(), traj.positions[0].len())));
        }
        traj.times.push(f.time);
        traj.positions.push(pts);
    }
    Ok((traj, manifest))
}
