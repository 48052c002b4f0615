use serde::{Deserialize, Serialize};

use super::metrics::chamfer_distance;
use crate::error::{GicError, Result};
use crate::geometry::{GicParticleSet, ParticleCloud};
use crate::mpm::Trajectory;
use crate::splat::{render_mask, Camera};

/// One observed time state: the extracted surface and one binary mask per view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedFrame {
    pub time: f64,
    pub surface: ParticleCloud,
    /// Row-major masks in `{0, 1}`, one per camera.
    pub masks: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cameras: Vec<Camera>,
    pub frames: Vec<ObservedFrame>,
}

impl Observation {
    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(GicError::invalid(format!(
                "observation needs at least 2 frames, got {}",
                self.frames.len()
            )));
        }
        if self.cameras.is_empty() {
            return Err(GicError::invalid("observation needs at least one camera"));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if i > 0 && !(f.time > self.frames[i - 1].time) {
                return Err(GicError::invalid("observation times must be strictly increasing"));
            }
            if f.masks.len() != self.cameras.len() {
                return Err(GicError::invalid(format!(
                    "frame {i}: {} masks for {} cameras",
                    f.masks.len(),
                    self.cameras.len()
                )));
            }
            for (j, (m, c)) in f.masks.iter().zip(&self.cameras).enumerate() {
                if m.len() != c.width * c.height {
                    return Err(GicError::invalid(format!(
                        "frame {i}, view {j}: mask has {} pixels, camera has {}",
                        m.len(),
                        c.width * c.height
                    )));
                }
            }
            if f.surface.is_empty() {
                return Err(GicError::invalid(format!("frame {i}: empty observed surface")));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    /// The first `n` frames.
    pub fn truncated(&self, n: usize) -> Observation {
        Observation {
            cameras: self.cameras.clone(),
            frames: self.frames.iter().take(n).cloned().collect(),
        }
    }
}

/// Mean absolute per-pixel difference.
pub fn mask_l1(rendered: &[f64], observed: &[f64]) -> Result<f64> {
    if rendered.len() != observed.len() {
        return Err(GicError::invalid(format!(
            "mask sizes differ: {} vs {}",
            rendered.len(),
            observed.len()
        )));
    }
    if rendered.is_empty() {
        return Err(GicError::invalid("empty masks"));
    }
    let sum: f64 = rendered.iter().zip(observed).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum / rendered.len() as f64)
}

/// Loss of one rollout with its two components, each averaged over frames.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub chamfer: f64,
    pub mask: f64,
}

/// Frame-averaged chamfer distance between simulated and observed surfaces
/// plus the view-averaged mask L1, the latter scaled by `mask_weight`.
/// Simulated masks are rendered from the advected Gaussian-informed particles.
pub fn rollout_loss(
    traj: &Trajectory,
    gic: &GicParticleSet,
    obs: &Observation,
    mask_weight: f64,
) -> Result<LossBreakdown> {
    if obs.frames.is_empty() {
        return Err(GicError::invalid("observation has no frames"));
    }
    if traj.surface.is_empty() {
        return Err(GicError::invalid("trajectory has no surface particles"));
    }
    let spacing = if traj.times.len() > 1 {
        traj.times[1] - traj.times[0]
    } else {
        0.0
    };
    let tolerance = 0.5 * spacing + 1e-9;
    let mut out = LossBreakdown::default();
    for (i, frame) in obs.frames.iter().enumerate() {
        let k = traj
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - frame.time).abs().total_cmp(&(b.1 - frame.time).abs()))
            .map(|(k, _)| k)
            .ok_or_else(|| GicError::invalid("empty trajectory"))?;
        if (traj.times[k] - frame.time).abs() > tolerance {
            return Err(GicError::invalid(format!(
                "observation frame {i} at t = {} has no simulated frame within {tolerance}",
                frame.time
            )));
        }
        out.chamfer += chamfer_distance(&traj.surface_at(k), &frame.surface)?;
        // reported even when unweighted so ablations stay comparable
        let moved = gic.with_positions(&traj.positions[k])?;
        let mut views = 0.0;
        for (cam, observed) in obs.cameras.iter().zip(&frame.masks) {
            views += mask_l1(&render_mask(&moved, cam), observed)?;
        }
        out.mask += views / obs.cameras.len() as f64;
    }
    let m = obs.frames.len() as f64;
    out.chamfer /= m;
    out.mask /= m;
    out.total = out.chamfer + mask_weight * out.mask;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_l1_cases() {
        let ones = vec![1.0; 16];
        let zeros = vec![0.0; 16];
        assert_eq!(mask_l1(&ones, &ones).unwrap(), 0.0);
        assert_eq!(mask_l1(&ones, &zeros).unwrap(), 1.0);
        let half: Vec<f64> = (0..16).map(|i| if i < 8 { 1.0 } else { 0.0 }).collect();
        assert!((mask_l1(&half, &zeros).unwrap() - 0.5).abs() <= 1.0 / 16.0);
        assert!(mask_l1(&ones, &zeros[..4]).is_err());
    }
}
