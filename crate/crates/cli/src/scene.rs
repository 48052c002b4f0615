//! Scene documents: cameras, per-frame assets and stage configurations.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use gic_core::geometry::{fill_object, FillConfig, FillOutput, GaussianPointSet};
use gic_core::ident::{IdentConfig, Observation, ObservedFrame};
use gic_core::io::{read_gaussian_ply, read_pfm, read_pgm};
use gic_core::mpm::{MaterialKind, MaterialSpec, SimConfig};
use gic_core::splat::Camera;

/// Relative spread allowed between consecutive frame intervals.
const FRAME_SPACING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    M,
    Mm,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub time_s: f64,
    /// One mask image per camera (PGM or PFM).
    pub masks: Vec<PathBuf>,
    /// Gaussian point set (PLY).
    pub gaussians: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub cameras: Vec<Camera>,
    pub frames: Vec<FrameSpec>,
    pub material: MaterialKind,
    #[serde(default)]
    pub truth: Option<MaterialSpec>,
    #[serde(default)]
    pub fill: FillConfig,
    /// Simulation settings; also used by identification.
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub ident: IdentConfig,
    #[serde(default)]
    pub units: Units,
    #[serde(skip)]
    pub root: PathBuf,
}

/// Marks errors caused by the user's input rather than by the numerics.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scene {}", path.display()))?;
        let mut scene: SceneConfig = serde_json::from_str(&text)
            .map_err(|e| input_error(format!("{}: {e}", path.display())))?;
        scene.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(input_error("scene needs at least one camera"));
        }
        for (i, c) in self.cameras.iter().enumerate() {
            c.validate().with_context(|| format!("camera {i}"))?;
        }
        if self.frames.is_empty() {
            return Err(input_error("scene needs at least one frame"));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if i > 0 && !(f.time_s > self.frames[i - 1].time_s) {
                return Err(input_error("frame times must be strictly increasing"));
            }
            if f.masks.len() != self.cameras.len() {
                return Err(input_error(format!(
                    "frame {i}: {} masks for {} cameras",
                    f.masks.len(),
                    self.cameras.len()
                )));
            }
        }
        self.fill.validate()?;
        self.sim.validate()?;
        self.ident.validate()?;
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        self.root.join(p)
    }

    pub fn frame(&self, index: usize) -> Result<&FrameSpec> {
        self.frames.get(index).ok_or_else(|| {
            input_error(format!("frame {index} out of range, scene has {}", self.frames.len()))
        })
    }

    pub fn gaussians(&self, index: usize) -> Result<GaussianPointSet> {
        let path = self.resolve(&self.frame(index)?.gaussians);
        existing(&path)?;
        Ok(read_gaussian_ply(&path)?)
    }

    /// Masks of one frame, checked against the camera resolutions.
    pub fn masks(&self, index: usize) -> Result<Vec<Vec<f64>>> {
        let frame = self.frame(index)?;
        frame
            .masks
            .iter()
            .zip(&self.cameras)
            .map(|(rel, cam)| {
                let path = self.resolve(rel);
                existing(&path)?;
                let (w, h, values) = match path.extension().and_then(|e| e.to_str()) {
                    Some("pfm") => read_pfm(&path)?,
                    _ => read_pgm(&path)?,
                };
                if (w, h) != (cam.width, cam.height) {
                    return Err(input_error(format!(
                        "mask {} is {w}x{h}, camera is {}x{}",
                        path.display(),
                        cam.width,
                        cam.height
                    )));
                }
                Ok(values)
            })
            .collect()
    }

    pub fn fill_config(&self, seed: Option<u64>) -> FillConfig {
        let mut cfg = self.fill.clone();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg
    }

    /// Fills one frame after checking that all its assets are present.
    pub fn fill_frame(&self, index: usize, seed: Option<u64>) -> Result<FillOutput> {
        self.masks(index)?;
        let gaussians = self.gaussians(index)?;
        Ok(fill_object(&gaussians, &self.cameras, &self.fill_config(seed))?)
    }

    /// Frame spacing implied by the frame times.
    pub fn frame_dt(&self) -> Result<f64> {
        if self.frames.len() < 2 {
            return Ok(self.sim.frame_dt);
        }
        let dt = self.frames[1].time_s - self.frames[0].time_s;
        for w in self.frames.windows(2) {
            if ((w[1].time_s - w[0].time_s) - dt).abs() > FRAME_SPACING_TOL * dt {
                return Err(input_error("frame times must be evenly spaced"));
            }
        }
        Ok(dt)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut sim = self.sim.clone();
        sim.frame_dt = self.frame_dt()?;
        if deterministic_forced() {
            sim.deterministic = true;
        }
        Ok(sim)
    }

    /// Observation built from every frame: filled surfaces plus masks,
    /// with times measured from the first frame.
    pub fn observation(&self, seed: Option<u64>) -> Result<(Observation, FillOutput)> {
        let t0 = self.frames[0].time_s;
        let mut first = None;
        let mut frames = Vec::with_capacity(self.frames.len());
        for (i, spec) in self.frames.iter().enumerate() {
            let out = self.fill_frame(i, seed)?;
            eprintln!("frame {i}: {} surface points", out.surface.len());
            frames.push(ObservedFrame {
                time: spec.time_s - t0,
                surface: out.surface.clone(),
                masks: self.masks(i)?,
            });
            if i == 0 {
                first = Some(out);
            }
        }
        let obs = Observation {
            cameras: self.cameras.clone(),
            frames,
        };
        obs.validate()?;
        Ok((obs, first.expect("at least one frame")))
    }
}

pub fn deterministic_forced() -> bool {
    std::env::var("GIC_DETERMINISTIC").is_ok_and(|v| v == "1")
}

fn existing(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!(InputError(format!("missing file {}", path.display())));
    }
    Ok(())
}
