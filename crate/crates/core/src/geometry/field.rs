use serde::{Deserialize, Serialize};

use crate::error::{GicError, Result};
use crate::Vec3;

/// Axis-aligned voxel grid of occupancy densities in `[0, 1]`.
///
/// Values are stored row-major with `z` varying fastest. Voxel `(i, j, k)`
/// spans `origin + [i, i + 1) * cell_size` along each axis, and its sample
/// lives at the voxel center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    pub origin: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
    pub values: Vec<f32>,
}

impl DensityField {
    pub fn zeros(origin: Vec3, cell_size: f64, dims: [usize; 3]) -> Self {
        Self::filled(origin, cell_size, dims, 0.0)
    }

    pub fn filled(origin: Vec3, cell_size: f64, dims: [usize; 3], value: f32) -> Self {
        Self {
            origin,
            cell_size,
            dims,
            values: vec![value; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_values(
        origin: Vec3,
        cell_size: f64,
        dims: [usize; 3],
        values: Vec<f32>,
    ) -> Result<Self> {
        let field = Self {
            origin,
            cell_size,
            dims,
            values,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(GicError::invalid(format!(
                "cell size must be positive, got {}",
                self.cell_size
            )));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(GicError::invalid("density field has an empty dimension"));
        }
        if self.values.len() != self.len() {
            return Err(GicError::invalid(format!(
                "density field holds {} values for dims {:?}",
                self.values.len(),
                self.dims
            )));
        }
        if let Some(v) = self.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(GicError::invalid(format!("density value {v} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.values[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f32) {
        let idx = self.index(i, j, k);
        self.values[idx] = value;
    }

    /// Upper corner of the grid.
    pub fn max_corner(&self) -> Vec3 {
        self.origin
            + Vec3::new(
                self.dims[0] as f64,
                self.dims[1] as f64,
                self.dims[2] as f64,
            ) * self.cell_size
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let hi = self.max_corner();
        (0..3).all(|a| p[a] >= self.origin[a] && p[a] <= hi[a])
    }

    /// Voxel containing `p`: `floor((p - origin) / cell_size)` clamped to
    /// valid indices, so points on the max face land in the last voxel.
    pub fn discretize(&self, p: &Vec3) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let c = ((p[a] - self.origin[a]) / self.cell_size).floor();
            idx[a] = if c.is_nan() || c < 0.0 {
                0
            } else {
                (c as usize).min(self.dims[a] - 1)
            };
        }
        idx
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin
            + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.cell_size
    }

    /// Value at the voxel containing `p`.
    pub fn value_at(&self, p: &Vec3) -> f32 {
        let [i, j, k] = self.discretize(p);
        self.get(i, j, k)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.cell_size.powi(3)
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Iterator over `(i, j, k, value)` in storage order.
    pub fn iter_voxels(&self) -> impl Iterator<Item = (usize, usize, usize, f32)> + '_ {
        let [_, ny, nz] = self.dims;
        self.values.iter().enumerate().map(move |(n, &v)| {
            let k = n % nz;
            let j = (n / nz) % ny;
            let i = n / (ny * nz);
            (i, j, k, v)
        })
    }
}

/// Doubles the resolution per axis. Fine samples sit at fine-voxel centers
/// and are trilinearly interpolated from the coarse voxel centers, with
/// coordinates clamped to the outermost coarse samples.
pub fn upsample_trilinear(field: &DensityField) -> Result<DensityField> {
    if field.is_empty() {
        return Err(GicError::invalid("cannot upsample an empty field"));
    }
    let [nx, ny, nz] = field.dims;
    let dims = [2 * nx, 2 * ny, 2 * nz];
    let mut out = DensityField::zeros(field.origin, field.cell_size * 0.5, dims);

    // per-axis (lower index, upper index, upper weight)
    let stencil = |n: usize| -> Vec<(usize, usize, f64)> {
        (0..2 * n)
            .map(|fine| {
                let c = (fine as f64 * 0.5 - 0.25).clamp(0.0, (n - 1) as f64);
                let lo = (c.floor() as usize).min(n - 1);
                let hi = (lo + 1).min(n - 1);
                (lo, hi, c - lo as f64)
            })
            .collect()
    };
    let (sx, sy, sz) = (stencil(nx), stencil(ny), stencil(nz));

    for (fi, &(x0, x1, tx)) in sx.iter().enumerate() {
        for (fj, &(y0, y1, ty)) in sy.iter().enumerate() {
            for (fk, &(z0, z1, tz)) in sz.iter().enumerate() {
                let g = |i, j, k| field.get(i, j, k) as f64;
                let c00 = g(x0, y0, z0) * (1.0 - tx) + g(x1, y0, z0) * tx;
                let c10 = g(x0, y1, z0) * (1.0 - tx) + g(x1, y1, z0) * tx;
                let c01 = g(x0, y0, z1) * (1.0 - tx) + g(x1, y0, z1) * tx;
                let c11 = g(x0, y1, z1) * (1.0 - tx) + g(x1, y1, z1) * tx;
                let c0 = c00 * (1.0 - ty) + c10 * ty;
                let c1 = c01 * (1.0 - ty) + c11 * ty;
                let v = c0 * (1.0 - tz) + c1 * tz;
                out.set(fi, fj, fk, v as f32);
            }
        }
    }
    Ok(out)
}

/// 3×3×3 box filter. Boundary neighborhoods are clipped to the grid and
/// averaged over the voxels that exist.
pub fn mean_filter(field: &DensityField) -> Result<DensityField> {
    if field.is_empty() {
        return Err(GicError::invalid("cannot filter an empty field"));
    }
    let dims = field.dims;
    let mut sums: Vec<f64> = field.values.iter().map(|&v| v as f64).collect();

    // The clipped box sum is separable, and so is its voxel count.
    for axis in 0..3 {
        let n = dims[axis];
        let stride = match axis {
            0 => dims[1] * dims[2],
            1 => dims[2],
            _ => 1,
        };
        let src = sums.clone();
        for (idx, out) in sums.iter_mut().enumerate() {
            let c = (idx / stride) % n;
            let mut s = src[idx];
            if c > 0 {
                s += src[idx - stride];
            }
            if c + 1 < n {
                s += src[idx + stride];
            }
            *out = s;
        }
    }

    let count = |c: usize, n: usize| -> f64 {
        (1 + usize::from(c > 0) + usize::from(c + 1 < n)) as f64
    };
    let mut out = field.clone();
    for (n, v) in out.values.iter_mut().enumerate() {
        let k = n % dims[2];
        let j = (n / dims[2]) % dims[1];
        let i = n / (dims[1] * dims[2]);
        let cnt = count(i, dims[0]) * count(j, dims[1]) * count(k, dims[2]);
        *v = ((sums[n] / cnt) as f32).clamp(0.0, 1.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> DensityField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * n * n).map(|_| rng.gen::<f32>()).collect();
        DensityField::from_values(Vec3::zeros(), 0.1, [n, n, n], values).unwrap()
    }

    #[test]
    fn upsample_preserves_constants() {
        let f = DensityField::filled(Vec3::new(1.0, 2.0, 3.0), 0.2, [3, 4, 5], 0.7);
        let up = upsample_trilinear(&f).unwrap();
        assert_eq!(up.dims, [6, 8, 10]);
        assert!((up.cell_size - 0.1).abs() < 1e-15);
        assert!(up.values.iter().all(|&v| (v - 0.7).abs() < 1e-6));
    }

    #[test]
    fn upsample_is_monotone_along_a_ramp() {
        let f = DensityField::from_values(Vec3::zeros(), 1.0, [2, 1, 1], vec![0.0, 1.0]).unwrap();
        let up = upsample_trilinear(&f).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                let line: Vec<f32> = (0..4).map(|i| up.get(i, j, k)).collect();
                assert!(line.windows(2).all(|w| w[0] <= w[1]), "{line:?}");
                assert_eq!(line, vec![0.0, 0.25, 0.75, 1.0]);
            }
        }
    }

    #[test]
    fn upsample_matches_direct_trilinear_oracle() {
        let f = random_field(4, 11);
        let up = upsample_trilinear(&f).unwrap();
        // Evaluate the cell-centered interpolant directly at each fine center.
        let sample = |p: Vec3| -> f64 {
            let mut base = [0usize; 3];
            let mut t = [0.0; 3];
            for a in 0..3 {
                let c = ((p[a] - f.origin[a]) / f.cell_size - 0.5).clamp(0.0, 3.0);
                base[a] = (c.floor() as usize).min(2);
                t[a] = c - base[a] as f64;
            }
            let mut acc = 0.0;
            for corner in 0..8 {
                let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
                let mut w = 1.0;
                for a in 0..3 {
                    w *= if o[a] == 1 { t[a] } else { 1.0 - t[a] };
                }
                acc += w * f.get(base[0] + o[0], base[1] + o[1], base[2] + o[2]) as f64;
            }
            acc
        };
        for (i, j, k, v) in up.iter_voxels() {
            let expect = sample(up.voxel_center(i, j, k));
            assert!((v as f64 - expect).abs() < 1e-6, "({i},{j},{k})");
        }
        let (lo, hi) = f.min_max();
        assert!(up.values.iter().all(|&v| v >= lo && v <= hi));
    }

    #[test]
    fn mean_filter_constant_and_impulse() {
        let f = DensityField::filled(Vec3::zeros(), 1.0, [4, 4, 4], 0.3);
        let g = mean_filter(&f).unwrap();
        assert!(g.values.iter().all(|&v| (v - 0.3).abs() < 1e-6));

        let mut f = DensityField::zeros(Vec3::zeros(), 1.0, [5, 5, 5]);
        f.set(2, 2, 2, 1.0);
        let g = mean_filter(&f).unwrap();
        assert!((g.get(2, 2, 2) - 1.0 / 27.0).abs() < 1e-7);
        assert!((g.get(1, 1, 1) - 1.0 / 27.0).abs() < 1e-7);
        assert_eq!(g.get(0, 0, 0), 0.0);
    }

    #[test]
    fn mean_filter_matches_brute_force() {
        let f = random_field(5, 3);
        let g = mean_filter(&f).unwrap();
        let n = 5i64;
        for (i, j, k, v) in g.iter_voxels() {
            let (mut sum, mut cnt) = (0.0f64, 0.0f64);
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    for dk in -1..=1i64 {
                        let (a, b, c) = (i as i64 + di, j as i64 + dj, k as i64 + dk);
                        if (0..n).contains(&a) && (0..n).contains(&b) && (0..n).contains(&c) {
                            sum += f.get(a as usize, b as usize, c as usize) as f64;
                            cnt += 1.0;
                        }
                    }
                }
            }
            assert!((v as f64 - sum / cnt).abs() < 1e-6);
        }
    }

    #[test]
    fn discretize_clamps_max_face() {
        let f = DensityField::zeros(Vec3::zeros(), 0.5, [2, 2, 2]);
        assert_eq!(f.discretize(&Vec3::new(1.0, 1.0, 1.0)), [1, 1, 1]);
        assert_eq!(f.discretize(&Vec3::new(-3.0, 0.6, 0.2)), [0, 1, 0]);
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let r = DensityField::from_values(Vec3::zeros(), 1.0, [1, 1, 2], vec![0.5, 1.5]);
        assert!(r.is_err());
    }
}
