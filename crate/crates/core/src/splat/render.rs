use nalgebra::{Matrix2, Matrix2x3, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{Camera, NEAR_PLANE};
use crate::geometry::{GaussianPointSet, GicParticleSet};
use crate::Vec3;

/// Per-splat opacity clamp; keeps transmittance strictly positive.
pub const ALPHA_MAX: f64 = 0.99;
/// Added to the diagonal of every projected covariance (pixels²).
pub const COV2D_REGULARIZATION: f64 = 0.3;
/// Splats only touch pixels within this many standard deviations.
const WINDOW_SIGMAS: f64 = 3.0;
const BAND_ROWS: usize = 16;

/// A Gaussian projected into the image plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2D {
    pub mean2d: Vector2<f64>,
    /// Projected covariance `J W Σ Wᵀ Jᵀ`, before regularization.
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
    pub opacity: f64,
    pub color: [f64; 3],
}

/// Anything that can be drawn as isotropic Gaussians.
pub trait Splattable: Sync {
    fn splat_count(&self) -> usize;
    /// `(center, scale, opacity, color)` of the i-th kernel.
    fn kernel(&self, i: usize) -> (Vec3, f64, f64, [f64; 3]);
}

impl Splattable for GaussianPointSet {
    fn splat_count(&self) -> usize {
        self.points.len()
    }
    fn kernel(&self, i: usize) -> (Vec3, f64, f64, [f64; 3]) {
        let p = &self.points[i];
        (p.center, p.scale, p.opacity, p.color)
    }
}

impl Splattable for GicParticleSet {
    fn splat_count(&self) -> usize {
        self.particles.len()
    }
    fn kernel(&self, i: usize) -> (Vec3, f64, f64, [f64; 3]) {
        let p = &self.particles[i];
        (p.position, p.scale, p.opacity, [1.0; 3])
    }
}

/// Color, coverage mask and accumulated depth images, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub color: Vec<[f64; 3]>,
    pub mask: Vec<f64>,
    pub depth: Vec<f64>,
}

/// Alpha-normalized depth with `+inf` where coverage is at most one half.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl DepthImage {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }
}

/// Projects an isotropic Gaussian with the affine (local Jacobian)
/// approximation of the perspective map. Returns `None` when the center is
/// at or behind the near plane.
pub fn project_gaussian(center: &Vec3, scale: f64, camera: &Camera) -> Option<Splat2D> {
    let pc = camera.to_camera(center);
    if pc.z <= NEAR_PLANE {
        return None;
    }
    let k = &camera.intrinsic;
    let (fx, skew, fy) = (k[0][0], k[0][1], k[1][1]);
    let iz = 1.0 / pc.z;
    let jac = Matrix2x3::new(
        fx * iz,
        skew * iz,
        -(fx * pc.x + skew * pc.y) * iz * iz,
        0.0,
        fy * iz,
        -fy * pc.y * iz * iz,
    );
    let m = jac * camera.rotation();
    let cov2d = m * m.transpose() * (scale * scale);
    Some(Splat2D {
        mean2d: camera.camera_to_pixel(&pc),
        cov2d,
        depth: pc.z,
        opacity: 0.0,
        color: [0.0; 3],
    })
}

/// Blends `(alpha, color, depth)` samples already sorted front to back and
/// returns `(color, mask, depth)` as the transmittance-weighted sums.
pub fn blend_pixel(samples: &[(f64, [f64; 3], f64)]) -> ([f64; 3], f64, f64) {
    let mut t = 1.0;
    let mut color = [0.0; 3];
    let (mut mask, mut depth) = (0.0, 0.0);
    for &(alpha, c, d) in samples {
        let w = t * alpha;
        for ch in 0..3 {
            color[ch] += w * c[ch];
        }
        mask += w;
        depth += w * d;
        t *= 1.0 - alpha;
    }
    (color, mask, depth)
}

struct Prepared {
    mean: Vector2<f64>,
    inv_cov: Matrix2<f64>,
    depth: f64,
    opacity: f64,
    color: [f64; 3],
    // inclusive pixel window
    x0: i64,
    x1: i64,
    y0: i64,
    y1: i64,
}

fn prepare<P: Splattable + ?Sized>(points: &P, camera: &Camera) -> Vec<Prepared> {
    let (w, h) = (camera.width as i64, camera.height as i64);
    let mut splats: Vec<(usize, Prepared)> = (0..points.splat_count())
        .into_par_iter()
        .filter_map(|i| {
            let (center, scale, opacity, color) = points.kernel(i);
            if opacity <= 0.0 {
                return None;
            }
            let s = project_gaussian(&center, scale, camera)?;
            let cov = s.cov2d + Matrix2::identity() * COV2D_REGULARIZATION;
            let inv_cov = cov.try_inverse()?;
            let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
            let mid = 0.5 * (a + c);
            let lambda_max = mid + (mid * mid - (a * c - b * b)).max(0.0).sqrt();
            let radius = WINDOW_SIGMAS * lambda_max.sqrt();
            let x0 = ((s.mean2d.x - radius).ceil() as i64).max(0);
            let x1 = ((s.mean2d.x + radius).floor() as i64).min(w - 1);
            let y0 = ((s.mean2d.y - radius).ceil() as i64).max(0);
            let y1 = ((s.mean2d.y + radius).floor() as i64).min(h - 1);
            if x0 > x1 || y0 > y1 {
                return None;
            }
            Some((
                i,
                Prepared {
                    mean: s.mean2d,
                    inv_cov,
                    depth: s.depth,
                    opacity,
                    color,
                    x0,
                    x1,
                    y0,
                    y1,
                },
            ))
        })
        .collect();
    // stable: equal depths keep input order
    splats.sort_by(|a, b| a.1.depth.total_cmp(&b.1.depth).then(a.0.cmp(&b.0)));
    splats.into_iter().map(|(_, p)| p).collect()
}

fn rasterize(splats: &[Prepared], camera: &Camera, with_color: bool) -> RenderOutput {
    let (w, h) = (camera.width, camera.height);
    let mut color = vec![[0.0; 3]; if with_color { w * h } else { 0 }];
    let mut mask = vec![0.0; w * h];
    let mut depth = vec![0.0; w * h];
    let mut trans = vec![1.0; w * h];

    let band = BAND_ROWS * w;
    let mut color_bands: Vec<&mut [[f64; 3]]> = if with_color {
        color.chunks_mut(band).collect()
    } else {
        (0..mask.len().div_ceil(band)).map(|_| &mut [][..]).collect()
    };
    mask.par_chunks_mut(band)
        .zip(depth.par_chunks_mut(band))
        .zip(trans.par_chunks_mut(band))
        .zip(color_bands.par_iter_mut())
        .enumerate()
        .for_each(|(b, (((mask, depth), trans), color))| {
            let row0 = (b * BAND_ROWS) as i64;
            let row1 = row0 + (mask.len() / w) as i64 - 1;
            for s in splats {
                if s.y1 < row0 || s.y0 > row1 {
                    continue;
                }
                for y in s.y0.max(row0)..=s.y1.min(row1) {
                    let dy = y as f64 - s.mean.y;
                    let row = (y - row0) as usize * w;
                    for x in s.x0..=s.x1 {
                        let dx = x as f64 - s.mean.x;
                        let power = -0.5
                            * (s.inv_cov[(0, 0)] * dx * dx
                                + 2.0 * s.inv_cov[(0, 1)] * dx * dy
                                + s.inv_cov[(1, 1)] * dy * dy);
                        let alpha = (s.opacity * power.exp()).min(ALPHA_MAX);
                        if alpha <= 0.0 {
                            continue;
                        }
                        let idx = row + x as usize;
                        let wgt = trans[idx] * alpha;
                        mask[idx] += wgt;
                        depth[idx] += wgt * s.depth;
                        if !color.is_empty() {
                            for ch in 0..3 {
                                color[idx][ch] += wgt * s.color[ch];
                            }
                        }
                        trans[idx] *= 1.0 - alpha;
                    }
                }
            }
        });
    drop(color_bands);

    RenderOutput {
        width: w,
        height: h,
        color,
        mask,
        depth,
    }
}

/// Renders color, mask and raw accumulated depth. Pixels untouched by any
/// splat stay at zero in all three channels.
pub fn render<P: Splattable + ?Sized>(points: &P, camera: &Camera) -> RenderOutput {
    let splats = prepare(points, camera);
    rasterize(&splats, camera, true)
}

/// Mask channel only.
pub fn render_mask<P: Splattable + ?Sized>(points: &P, camera: &Camera) -> Vec<f64> {
    let splats = prepare(points, camera);
    rasterize(&splats, camera, false).mask
}

/// Depth normalized by accumulated alpha where the mask exceeds 0.5,
/// `+inf` elsewhere.
pub fn render_depth_only<P: Splattable + ?Sized>(points: &P, camera: &Camera) -> DepthImage {
    let splats = prepare(points, camera);
    let out = rasterize(&splats, camera, false);
    let values = out
        .mask
        .iter()
        .zip(&out.depth)
        .map(|(&a, &d)| if a > 0.5 { d / a } else { f64::INFINITY })
        .collect();
    DepthImage {
        width: out.width,
        height: out.height,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GaussianPoint;
    use nalgebra::{Matrix3, Matrix4};

    fn axis_camera(focal: f64, size: usize) -> Camera {
        let c = (size as f64 - 1.0) * 0.5;
        let k = Matrix3::new(focal, 0.0, c, 0.0, focal, c, 0.0, 0.0, 1.0);
        Camera::new(Matrix4::identity(), k, size, size)
    }

    fn gset(points: &[(Vec3, f64, f64)]) -> GaussianPointSet {
        GaussianPointSet::new(
            points
                .iter()
                .map(|&(c, s, o)| GaussianPoint::new(c, s, o, [1.0, 0.5, 0.25]))
                .collect(),
        )
    }

    #[test]
    fn on_axis_covariance_is_isotropic() {
        let cam = axis_camera(50.0, 33);
        let s = project_gaussian(&Vec3::new(0.0, 0.0, 1.0), 0.1, &cam).unwrap();
        let expect = (50.0f64 * 0.1).powi(2);
        assert!((s.cov2d - Matrix2::identity() * expect).norm() < 1e-9);
        let s = project_gaussian(&Vec3::new(0.0, 0.0, 2.0), 0.1, &cam).unwrap();
        assert!((s.mean2d - Vector2::new(16.0, 16.0)).norm() < 1e-12);
        assert!((s.depth - 2.0).abs() < 1e-15);
    }

    #[test]
    fn culls_behind_near_plane() {
        let cam = axis_camera(50.0, 33);
        assert!(project_gaussian(&Vec3::new(0.0, 0.0, -1.0), 0.1, &cam).is_none());
        assert!(project_gaussian(&Vec3::new(0.0, 0.0, 0.0), 0.1, &cam).is_none());
    }

    #[test]
    fn single_opaque_splat_is_clamped() {
        let cam = axis_camera(50.0, 33);
        let out = render(&gset(&[(Vec3::new(0.0, 0.0, 2.0), 0.05, 1.0)]), &cam);
        let center = 16 * 33 + 16;
        assert!((out.mask[center] - 0.99).abs() < 1e-12);
        assert!((out.depth[center] - 0.99 * 2.0).abs() < 1e-12);
        assert_eq!(out.mask[0], 0.0);
        assert_eq!(out.color[0], [0.0; 3]);
    }

    #[test]
    fn coincident_splats_follow_blending_identity() {
        let cam = axis_camera(50.0, 33);
        let (a, b) = (0.4, 0.7);
        let pts = gset(&[(Vec3::new(0.0, 0.0, 2.0), 0.05, a), (Vec3::new(0.0, 0.0, 2.0), 0.05, b)]);
        let out = render(&pts, &cam);
        assert!((out.mask[16 * 33 + 16] - (a + (1.0 - a) * b)).abs() < 1e-12);
    }

    #[test]
    fn depth_only_normalizes_and_marks_empty() {
        let cam = axis_camera(50.0, 33);
        let d = render_depth_only(&gset(&[(Vec3::new(0.0, 0.0, 2.0), 0.05, 1.0)]), &cam);
        assert!((d.get(16, 16) - 2.0).abs() < 1e-3);
        assert!(d.get(0, 0).is_infinite());
        let empty = render_depth_only(&GaussianPointSet::default(), &cam);
        assert!(empty.values.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn near_splat_occludes_far_splat() {
        let cam = axis_camera(50.0, 33);
        let mut pts = gset(&[(Vec3::new(0.0, 0.0, 2.0), 0.05, 1.0), (Vec3::new(0.0, 0.0, 3.0), 0.05, 1.0)]);
        pts.points[0].color = [0.0; 3];
        pts.points[1].color = [1.0; 3];
        let out = render(&pts, &cam);
        assert!(out.color[16 * 33 + 16][0] <= 0.01 + 1e-12);
    }
}
