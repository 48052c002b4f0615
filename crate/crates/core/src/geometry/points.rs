use serde::{Deserialize, Serialize};

use crate::error::{GicError, Result};
use crate::Vec3;

/// One isotropic Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPoint {
    pub center: Vec3,
    pub scale: f64,
    pub opacity: f64,
    pub color: [f64; 3],
}

impl GaussianPoint {
    pub fn new(center: Vec3, scale: f64, opacity: f64, color: [f64; 3]) -> Self {
        Self {
            center,
            scale,
            opacity,
            color,
        }
    }
}

/// Isotropic Gaussians describing one time state of an object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianPointSet {
    pub points: Vec<GaussianPoint>,
}

impl GaussianPointSet {
    pub fn new(points: Vec<GaussianPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.points.iter().map(|p| p.center)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.scale > 0.0) || !p.scale.is_finite() {
                return Err(GicError::invalid(format!(
                    "gaussian {i}: scale must be positive, got {}",
                    p.scale
                )));
            }
            if !(0.0..=1.0).contains(&p.opacity) {
                return Err(GicError::invalid(format!(
                    "gaussian {i}: opacity {} outside [0, 1]",
                    p.opacity
                )));
            }
            if !p.center.iter().all(|c| c.is_finite()) {
                return Err(GicError::invalid(format!("gaussian {i}: non-finite center")));
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds of the centers, `None` when empty.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        bounds_of(self.centers())
    }
}

/// A bare set of positions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub positions: Vec<Vec3>,
}

impl ParticleCloud {
    pub fn new(positions: Vec<Vec3>) -> Self {
        Self { positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        bounds_of(self.positions.iter().copied())
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.positions.is_empty() {
            return None;
        }
        let sum: Vec3 = self.positions.iter().sum();
        Some(sum / self.positions.len() as f64)
    }
}

/// A continuum particle that can also be splatted: position, shared scale
/// and an opacity read back from the density field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GicParticle {
    pub position: Vec3,
    pub scale: f64,
    pub opacity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GicParticleSet {
    pub particles: Vec<GicParticle>,
}

impl GicParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn positions(&self) -> ParticleCloud {
        ParticleCloud::new(self.particles.iter().map(|p| p.position).collect())
    }

    /// Indices of particles whose density lies in the surface band
    /// `[th_min, th_max]`.
    pub fn surface_indices(&self, th_min: f64, th_max: f64) -> Vec<usize> {
        self.particles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.opacity >= th_min && p.opacity <= th_max)
            .map(|(i, _)| i)
            .collect()
    }

    /// Same particles moved to new positions, keeping scale and opacity.
    pub fn with_positions(&self, positions: &[Vec3]) -> Result<GicParticleSet> {
        if positions.len() != self.particles.len() {
            return Err(GicError::invalid(format!(
                "expected {} positions, got {}",
                self.particles.len(),
                positions.len()
            )));
        }
        Ok(GicParticleSet {
            particles: self
                .particles
                .iter()
                .zip(positions)
                .map(|(p, x)| GicParticle {
                    position: *x,
                    ..*p
                })
                .collect(),
        })
    }
}

pub(crate) fn bounds_of(points: impl Iterator<Item = Vec3>) -> Option<(Vec3, Vec3)> {
    let mut it = points.peekable();
    let first = *it.peek()?;
    Some(it.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p))))
}
