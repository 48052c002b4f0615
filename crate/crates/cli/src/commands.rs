use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use gic_core::ident::{chamfer_distance, emd, identify as run_identify, EMD_MAX_POINTS};
use gic_core::io::{
    load_trajectory, parse_gaussian_ply, parse_gic_ply, parse_ply, read_gic_ply, save_trajectory, write_field,
    write_gic_ply, write_pfm, write_pgm, write_points_ply, write_ppm, PlyFormat,
};
use gic_core::mpm::{simulate as run_simulate, MaterialSpec};
use gic_core::splat::{render as run_render, Splattable};
use gic_core::ParticleCloud;

use crate::scene::{input_error, SceneConfig, Units};

pub const FIELD_FILE: &str = "field.gicf";
pub const CONTINUUM_FILE: &str = "continuum.ply";
pub const PARTICLES_FILE: &str = "particles.ply";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn fill(scene_path: &Path, frame: usize, out: &Path, seed: Option<u64>) -> Result<()> {
    let scene = SceneConfig::load(scene_path)?;
    let filled = scene.fill_frame(frame, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_field(out.join(FIELD_FILE), &filled.field)?;
    let on_surface = {
        let th = (scene.fill.th_min, scene.fill.th_max);
        filled
            .continuum
            .positions
            .iter()
            .map(|p| {
                let v = filled.field.value_at(p) as f64;
                v >= th.0 && v <= th.1
            })
            .collect::<Vec<_>>()
    };
    write_points_ply(
        out.join(CONTINUUM_FILE),
        &filled.continuum.positions,
        Some(&on_surface),
        PlyFormat::BinaryLittleEndian,
    )?;
    write_gic_ply(out.join(PARTICLES_FILE), &filled.particles, PlyFormat::BinaryLittleEndian)?;
    eprintln!(
        "frame {frame}: {} internal samples, {} continuum particles, {} surface particles",
        filled.internal.len(),
        filled.continuum.len(),
        filled.surface.len()
    );
    Ok(())
}

fn load_material(path: &Path) -> Result<MaterialSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mat: MaterialSpec =
        serde_json::from_str(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))?;
    mat.validate()?;
    Ok(mat)
}

pub fn simulate(
    scene_path: &Path,
    params: Option<&Path>,
    particles: Option<&Path>,
    frames: usize,
    out: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let scene = SceneConfig::load(scene_path)?;
    if frames < 1 {
        return Err(input_error("--frames must be at least 1"));
    }
    let mat = match params {
        Some(p) => load_material(p)?,
        None => scene
            .truth
            .clone()
            .ok_or_else(|| input_error("no --params given and the scene has no ground truth"))?,
    };
    let gic = match particles {
        Some(p) => read_gic_ply(p)?,
        None => scene.fill_frame(0, seed)?.particles,
    };
    let sim = scene.sim_config()?;
    let traj = run_simulate(&gic, &mat, &sim, frames)?;
    save_trajectory(out, &traj, &mat, sim.frame_dt)?;
    eprintln!(
        "{} frames of {} particles ({} on the surface) written to {}",
        traj.frame_count(),
        gic.len(),
        traj.surface.len(),
        out.display()
    );
    Ok(())
}

pub fn render(points: &Path, scene_path: &Path, camera_index: usize, out: &Path) -> Result<()> {
    let scene = SceneConfig::load(scene_path)?;
    let camera = scene.cameras.get(camera_index).ok_or_else(|| {
        input_error(format!(
            "camera {camera_index} out of range, scene has {}",
            scene.cameras.len()
        ))
    })?;
    let bytes = fs::read(points).with_context(|| format!("reading {}", points.display()))?;
    let source = points.display().to_string();
    let table = parse_ply(&bytes, &source)?;
    let kernels: Box<dyn Splattable> = if table.column("red", &source).is_ok() {
        Box::new(parse_gaussian_ply(&bytes, &source)?)
    } else {
        Box::new(parse_gic_ply(&bytes, &source)?)
    };
    let image = run_render(kernels.as_ref(), camera);
    let (w, h) = (image.width, image.height);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_ppm(out.with_extension("ppm"), w, h, &image.color)?;
    write_pgm(out.with_extension("pgm"), w, h, &image.mask)?;
    write_pfm(out.with_extension("pfm"), w, h, &image.depth)?;
    eprintln!("rendered {} kernels at {w}x{h}", kernels.splat_count());
    Ok(())
}

pub fn identify(scene_path: &Path, seed: u64, out: &Path) -> Result<()> {
    let scene = SceneConfig::load(scene_path)?;
    let (obs, first) = scene.observation(Some(seed))?;
    let mut cfg = scene.ident.clone();
    cfg.sim = scene.sim_config()?;
    cfg.seed = seed;
    let mut result = run_identify(&obs, &first.particles, scene.material, &cfg)?;
    if let Some(truth) = &scene.truth {
        result.score_against(truth);
    }
    write_json(out, &result)?;
    let params = &result.loss_history[result.best_iteration.min(result.loss_history.len() - 1)].params;
    println!("material {}", scene.material.name());
    for (name, value) in params {
        println!("  {name:<12} {value:.6}");
    }
    println!(
        "  v0           ({:.4}, {:.4}, {:.4})",
        result.v0_hat.x, result.v0_hat.y, result.v0_hat.z
    );
    println!("  loss         {:.6e} -> {:.6e}", result.initial_loss(), result.best_loss());
    if let Some(mae) = &result.mae_x100 {
        println!("MAE x100");
        for (name, value) in mae {
            println!("  {name:<12} {value:.3}");
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FrameMetrics {
    index: usize,
    time: f64,
    chamfer: f64,
    emd: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    /// Unit of the chamfer values.
    chamfer_unit: String,
    /// Unit of the EMD values.
    emd_unit: String,
    frames: Vec<FrameMetrics>,
    mean_chamfer: f64,
    mean_emd: Option<f64>,
}

fn surface_cloud(positions: &[gic_core::Vec3], surface: &[usize]) -> ParticleCloud {
    if surface.is_empty() {
        ParticleCloud::new(positions.to_vec())
    } else {
        ParticleCloud::new(surface.iter().map(|&i| positions[i]).collect())
    }
}

pub fn eval(traj_dir: &Path, ref_dir: &Path, out: Option<&Path>, scene_path: Option<&Path>) -> Result<()> {
    let units = match scene_path {
        Some(p) => SceneConfig::load(p)?.units,
        None => Units::M,
    };
    let (traj, _) = load_trajectory(traj_dir)?;
    let (reference, _) = load_trajectory(ref_dir)?;
    if traj.frame_count() != reference.frame_count() {
        return Err(input_error(format!(
            "trajectories have {} and {} frames",
            traj.frame_count(),
            reference.frame_count()
        )));
    }
    // mm² scenes are reported in units of 10³ mm²
    let (cd_scale, chamfer_unit, emd_unit) = match units {
        Units::Mm => (1e-3, "1e3 mm^2", "mm"),
        Units::M => (1.0, "m^2", "m"),
    };
    let mut frames = Vec::with_capacity(traj.frame_count());
    for k in 0..traj.frame_count() {
        let a = surface_cloud(&traj.positions[k], &traj.surface);
        let b = surface_cloud(&reference.positions[k], &reference.surface);
        let chamfer = chamfer_distance(&a, &b)? * cd_scale;
        let emd = if a.len() == b.len() && a.len() <= EMD_MAX_POINTS {
            Some(emd(&a, &b)?)
        } else {
            None
        };
        frames.push(FrameMetrics {
            index: k,
            time: traj.times[k],
            chamfer,
            emd,
        });
    }
    let n = frames.len() as f64;
    let mean_chamfer = frames.iter().map(|f| f.chamfer).sum::<f64>() / n;
    let mean_emd = frames
        .iter()
        .map(|f| f.emd)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / n);
    let report = EvalReport {
        chamfer_unit: chamfer_unit.into(),
        emd_unit: emd_unit.into(),
        frames,
        mean_chamfer,
        mean_emd,
    };
    println!("{:>5} {:>10} {:>14} {:>14}", "frame", "time", format!("CD [{chamfer_unit}]"), format!("EMD [{emd_unit}]"));
    for f in &report.frames {
        let emd = f.emd.map_or("-".to_string(), |e| format!("{e:.6e}"));
        println!("{:>5} {:>10.5} {:>14.6e} {:>14}", f.index, f.time, f.chamfer, emd);
    }
    let mean_emd = report.mean_emd.map_or("-".to_string(), |e| format!("{e:.6e}"));
    println!("{:>5} {:>10} {:>14.6e} {:>14}", "mean", "", report.mean_chamfer, mean_emd);
    if let Some(path) = out {
        write_json(path, &report)?;
    }
    Ok(())
}
