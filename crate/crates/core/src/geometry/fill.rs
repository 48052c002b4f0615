use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::{mean_filter, upsample_trilinear, DensityField};
use super::points::{bounds_of, GaussianPointSet, GicParticle, GicParticleSet, ParticleCloud};
use crate::error::{GicError, Result};
use crate::splat::{render_depth_only, Camera, DepthImage};
use crate::Vec3;

/// Coarse cells of padding added on every side of the Gaussian bounding box.
pub const FIELD_PADDING_CELLS: usize = 2;

/// Parameters of coarse-to-fine filling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FillConfig {
    /// Initial (coarsest) grid size.
    pub dx: f64,
    /// Number of refinement rounds.
    pub n_u: u32,
    pub th_min: f64,
    pub th_max: f64,
    /// Candidate internal particles drawn before depth filtering.
    pub n_internal: usize,
    pub seed: u64,
}

impl Default for FillConfig {
    fn default() -> Self {
        Self {
            dx: 0.1,
            n_u: 4,
            th_min: 0.5,
            th_max: 0.8,
            n_internal: 200_000,
            seed: 0,
        }
    }
}

impl FillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) {
            return Err(GicError::invalid(format!("dx must be positive, got {}", self.dx)));
        }
        if self.n_u < 1 {
            return Err(GicError::invalid("n_u must be at least 1"));
        }
        if !(0.0 < self.th_min && self.th_min < self.th_max && self.th_max <= 1.0) {
            return Err(GicError::invalid(format!(
                "thresholds must satisfy 0 < th_min < th_max <= 1, got ({}, {})",
                self.th_min, self.th_max
            )));
        }
        Ok(())
    }

    /// Grid spacing of the final field.
    pub fn final_cell_size(&self) -> f64 {
        self.dx / 2f64.powi(self.n_u as i32 - 1)
    }

    /// Splat scale carried by every continuum particle.
    pub fn particle_scale(&self) -> f64 {
        self.dx / 2f64.powi(self.n_u as i32)
    }
}

/// Draws `count` points uniformly from the bounding box of the Gaussian centers.
pub fn sample_bbox_particles(
    gaussians: &GaussianPointSet,
    count: usize,
    seed: u64,
) -> Result<ParticleCloud> {
    let (lo, hi) = gaussians
        .bounds()
        .ok_or_else(|| GicError::invalid("cannot sample from an empty Gaussian set"))?;
    if count == 0 {
        return Err(GicError::invalid("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = hi - lo;
    let positions = (0..count)
        .map(|_| {
            Vec3::new(
                lo.x + extent.x * rng.gen::<f64>(),
                lo.y + extent.y * rng.gen::<f64>(),
                lo.z + extent.z * rng.gen::<f64>(),
            )
        })
        .collect();
    Ok(ParticleCloud::new(positions))
}

/// Keeps the candidates that sit at or behind the rendered surface in every
/// view. Candidates projecting outside an image, or behind a camera, fail
/// that view.
pub fn filter_internal(
    candidates: &ParticleCloud,
    cameras: &[Camera],
    depth_maps: &[DepthImage],
) -> Result<ParticleCloud> {
    if cameras.len() != depth_maps.len() {
        return Err(GicError::invalid(format!(
            "{} cameras but {} depth maps",
            cameras.len(),
            depth_maps.len()
        )));
    }
    for (i, (cam, depth)) in cameras.iter().zip(depth_maps).enumerate() {
        if cam.width != depth.width || cam.height != depth.height {
            return Err(GicError::invalid(format!(
                "depth map {i} is {}x{} but camera is {}x{}",
                depth.width, depth.height, cam.width, cam.height
            )));
        }
    }
    let kept = candidates
        .positions
        .iter()
        .filter(|p| {
            cameras.iter().zip(depth_maps).all(|(cam, depth)| {
                let Some((uv, d)) = cam.project(p) else {
                    return false;
                };
                let Some((u, v)) = cam.pixel_index(&uv) else {
                    return false;
                };
                depth.get(u, v) <= d
            })
        })
        .copied()
        .collect();
    Ok(ParticleCloud::new(kept))
}

fn reassign(field: &mut DensityField, points: &[Vec3]) {
    for p in points {
        let [i, j, k] = field.discretize(p);
        field.set(i, j, k, 1.0);
    }
}

/// Iterative upsample / mean-filter / reassign filling of an occupancy field.
///
/// The field covers the Gaussian bounding box padded by
/// [`FIELD_PADDING_CELLS`] coarse cells. Round one only filters and
/// reassigns; later rounds first double the resolution. Every voxel that
/// contains an input particle ends at exactly 1.
pub fn coarse_to_fine_fill(
    gaussians: &GaussianPointSet,
    internal: &ParticleCloud,
    cfg: &FillConfig,
) -> Result<DensityField> {
    cfg.validate()?;
    let particles: Vec<Vec3> = gaussians
        .centers()
        .chain(internal.positions.iter().copied())
        .collect();
    if particles.is_empty() {
        return Err(GicError::invalid("no particles to fill from"));
    }
    let (lo, hi) = match gaussians.bounds() {
        Some(b) => b,
        None => bounds_of(particles.iter().copied()).expect("nonempty"),
    };
    let pad = FIELD_PADDING_CELLS as f64 * cfg.dx;
    let origin = lo - Vec3::repeat(pad);
    let extent = hi - lo;
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((extent[a] / cfg.dx).ceil() as usize).max(1) + 2 * FIELD_PADDING_CELLS;
    }

    let mut field = DensityField::zeros(origin, cfg.dx, dims);
    for round in 1..=cfg.n_u {
        if round != 1 {
            field = upsample_trilinear(&field)?;
            reassign(&mut field, &particles);
        }
        field = mean_filter(&field)?;
        reassign(&mut field, &particles);
    }
    Ok(field)
}

/// Voxel centers with density at least `th_min`.
pub fn extract_continuum(field: &DensityField, th_min: f64) -> ParticleCloud {
    collect_centers(field, |v| v >= th_min)
}

/// Voxel centers with density in `[th_min, th_max]`.
pub fn extract_surface(field: &DensityField, th_min: f64, th_max: f64) -> Result<ParticleCloud> {
    if !(th_min < th_max) {
        return Err(GicError::invalid(format!(
            "surface band requires th_min < th_max, got ({th_min}, {th_max})"
        )));
    }
    Ok(collect_centers(field, |v| v >= th_min && v <= th_max))
}

fn collect_centers(field: &DensityField, keep: impl Fn(f64) -> bool) -> ParticleCloud {
    ParticleCloud::new(
        field
            .iter_voxels()
            .filter(|&(_, _, _, v)| keep(v as f64))
            .map(|(i, j, k, _)| field.voxel_center(i, j, k))
            .collect(),
    )
}

/// Attaches the shared splat scale and the per-voxel density to each
/// continuum point.
pub fn make_gaussian_informed(
    continuum: &ParticleCloud,
    field: &DensityField,
    cfg: &FillConfig,
) -> Result<GicParticleSet> {
    let scale = cfg.particle_scale();
    let particles = continuum
        .positions
        .iter()
        .map(|p| {
            if !field.contains(p) {
                return Err(GicError::invalid(format!(
                    "point ({}, {}, {}) lies outside the density field",
                    p.x, p.y, p.z
                )));
            }
            Ok(GicParticle {
                position: *p,
                scale,
                opacity: field.value_at(p) as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GicParticleSet { particles })
}

/// Everything produced by filling one object.
#[derive(Debug, Clone)]
pub struct FillOutput {
    /// Bounding-box samples that passed the depth test in every view.
    pub internal: ParticleCloud,
    pub field: DensityField,
    pub continuum: ParticleCloud,
    pub surface: ParticleCloud,
    pub particles: GicParticleSet,
}

/// Runs the whole filling pipeline for one frame: depth rendering in every
/// view, bounding-box sampling, depth filtering, coarse-to-fine filling and
/// extraction of the continuum, its surface and the Gaussian-informed set.
pub fn fill_object(gaussians: &GaussianPointSet, cameras: &[Camera], cfg: &FillConfig) -> Result<FillOutput> {
    cfg.validate()?;
    gaussians.validate()?;
    if cameras.is_empty() {
        return Err(GicError::invalid("filling needs at least one camera"));
    }
    let depth: Vec<DepthImage> = cameras.iter().map(|c| render_depth_only(gaussians, c)).collect();
    let seed = crate::rng::subseed(cfg.seed, "sampling");
    let candidates = sample_bbox_particles(gaussians, cfg.n_internal, seed)?;
    let internal = filter_internal(&candidates, cameras, &depth)?;
    let field = coarse_to_fine_fill(gaussians, &internal, cfg)?;
    let continuum = extract_continuum(&field, cfg.th_min);
    let surface = extract_surface(&field, cfg.th_min, cfg.th_max)?;
    let particles = make_gaussian_informed(&continuum, &field, cfg)?;
    Ok(FillOutput {
        internal,
        field,
        continuum,
        surface,
        particles,
    })
}
