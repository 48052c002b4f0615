use nalgebra::{Matrix3, Matrix4, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{GicError, Result};
use crate::Vec3;

/// Points closer than this (camera-space z) are culled.
pub const NEAR_PLANE: f64 = 1e-3;

/// Pinhole camera. The camera looks down +z, image x grows to the right and
/// image y grows downwards; pixel `(u, v)` has its center at integer
/// coordinates in the intrinsic frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    /// World-to-camera transform, row-major.
    pub extrinsic: [[f64; 4]; 4],
    /// Intrinsic matrix in pixels, row-major.
    pub intrinsic: [[f64; 3]; 3],
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn new(extrinsic: Matrix4<f64>, intrinsic: Matrix3<f64>, width: usize, height: usize) -> Self {
        let mut e = [[0.0; 4]; 4];
        let mut k = [[0.0; 3]; 3];
        for r in 0..4 {
            for c in 0..4 {
                e[r][c] = extrinsic[(r, c)];
            }
        }
        for r in 0..3 {
            for c in 0..3 {
                k[r][c] = intrinsic[(r, c)];
            }
        }
        Self {
            extrinsic: e,
            intrinsic: k,
            width,
            height,
        }
    }

    /// Camera at `eye` looking at `target`. `focal` is in pixels and the
    /// principal point sits at the image center.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, focal: f64, width: usize, height: usize) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(rot * eye);
        let mut w = Matrix4::identity();
        w.fixed_view_mut::<3, 3>(0, 0).copy_from(&rot);
        w.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let k = Matrix3::new(
            focal,
            0.0,
            (width as f64 - 1.0) * 0.5,
            0.0,
            focal,
            (height as f64 - 1.0) * 0.5,
            0.0,
            0.0,
            1.0,
        );
        Self::new(w, k, width, height)
    }

    pub fn extrinsic_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|r, c| self.extrinsic[r][c])
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.intrinsic[r][c])
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.extrinsic[r][c])
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.extrinsic;
        if e[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(GicError::invalid("extrinsic bottom row must be (0, 0, 0, 1)"));
        }
        let k = &self.intrinsic;
        if k[1][0] != 0.0 || k[2][0] != 0.0 || k[2][1] != 0.0 || k[2][2] != 1.0 {
            return Err(GicError::invalid("intrinsic matrix must be upper-triangular with K[2][2] = 1"));
        }
        if !(k[0][0] > 0.0 && k[1][1] > 0.0) {
            return Err(GicError::invalid("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GicError::invalid("camera resolution must be nonzero"));
        }
        Ok(())
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let e = &self.extrinsic;
        Vec3::new(
            e[0][0] * p.x + e[0][1] * p.y + e[0][2] * p.z + e[0][3],
            e[1][0] * p.x + e[1][1] * p.y + e[1][2] * p.z + e[1][3],
            e[2][0] * p.x + e[2][1] * p.y + e[2][2] * p.z + e[2][3],
        )
    }

    /// Pixel coordinates of a camera-space point (no near-plane check).
    pub fn camera_to_pixel(&self, pc: &Vec3) -> Vector2<f64> {
        let k = &self.intrinsic;
        let (x, y) = (pc.x / pc.z, pc.y / pc.z);
        Vector2::new(k[0][0] * x + k[0][1] * y + k[0][2], k[1][1] * y + k[1][2])
    }

    /// Projects a world point to `(pixel, depth)`, or `None` behind the near plane.
    pub fn project(&self, p: &Vec3) -> Option<(Vector2<f64>, f64)> {
        let pc = self.to_camera(p);
        (pc.z > NEAR_PLANE).then(|| (self.camera_to_pixel(&pc), pc.z))
    }

    /// Nearest pixel to a projected point, `None` when outside the image.
    pub fn pixel_index(&self, uv: &Vector2<f64>) -> Option<(usize, usize)> {
        let (u, v) = (uv.x.round(), uv.y.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 || !u.is_finite() || !v.is_finite() {
            return None;
        }
        Some((u as usize, v as usize))
    }
}
