//! Point-cloud distances.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{GicError, Result};
use crate::geometry::ParticleCloud;
use crate::Vec3;

/// Above this many point pairs the nearest-neighbor search uses a hash grid.
const BRUTE_FORCE_PAIRS: usize = 4_000_000;
/// Largest cloud size accepted by the exact assignment solver.
pub const EMD_MAX_POINTS: usize = 2048;

/// Symmetric chamfer distance: mean squared nearest-neighbor distance from
/// `a` to `b` plus the same from `b` to `a`, in scene units².
pub fn chamfer_distance(a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(GicError::invalid("chamfer distance needs two nonempty clouds"));
    }
    Ok(mean_nearest_sq(&a.positions, &b.positions) + mean_nearest_sq(&b.positions, &a.positions))
}

/// Mean over `from` of the squared distance to the closest point of `to`.
fn mean_nearest_sq(from: &[Vec3], to: &[Vec3]) -> f64 {
    let sum: f64 = if from.len() * to.len() <= BRUTE_FORCE_PAIRS {
        from.par_iter()
            .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect::<Vec<_>>()
            .iter()
            .sum()
    } else {
        let index = HashGrid::build(to);
        from.par_iter()
            .map(|p| index.nearest_sq(p))
            .collect::<Vec<_>>()
            .iter()
            .sum()
    };
    sum / from.len() as f64
}

/// Uniform hash grid for exact nearest-neighbor queries.
struct HashGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    lo: Vec3,
    cells: HashMap<[i64; 3], Vec<u32>>,
    /// Largest occupied cell index per axis (smallest is 0).
    top: [i64; 3],
}

impl<'a> HashGrid<'a> {
    fn build(points: &'a [Vec3]) -> Self {
        let (lo, hi) = crate::geometry::ParticleCloud::new(points.to_vec())
            .bounds()
            .expect("nonempty");
        let extent = (hi - lo).max().max(1e-12);
        // about two points per occupied cell for surface-like clouds
        let cell = (extent / (points.len() as f64).sqrt()).max(extent / 2048.0);
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut top = [0i64; 3];
        for (i, p) in points.iter().enumerate() {
            let k = Self::key(p, &lo, cell);
            for a in 0..3 {
                top[a] = top[a].max(k[a]);
            }
            cells.entry(k).or_default().push(i as u32);
        }
        Self {
            points,
            cell,
            lo,
            cells,
            top,
        }
    }

    fn key(p: &Vec3, lo: &Vec3, cell: f64) -> [i64; 3] {
        let q = (p - lo) / cell;
        [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
    }

    fn nearest_sq(&self, p: &Vec3) -> f64 {
        let raw = Self::key(p, &self.lo, self.cell);
        let c = [0, 1, 2].map(|a| raw[a].clamp(0, self.top[a]));
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for di in -ring..=ring {
                for dj in -ring..=ring {
                    for dk in -ring..=ring {
                        if di.abs().max(dj.abs()).max(dk.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) = self.cells.get(&[c[0] + di, c[1] + dj, c[2] + dk]) {
                            for &i in ids {
                                best = best.min((p - self.points[i as usize]).norm_squared());
                            }
                        }
                    }
                }
            }
            // an unsearched point lies beyond some face of the searched box
            // that still has occupied cells behind it
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if c[a] - ring > 0 {
                    let face = self.lo[a] + (c[a] - ring) as f64 * self.cell;
                    bound = bound.min(p[a] - face);
                }
                if c[a] + ring < self.top[a] {
                    let face = self.lo[a] + (c[a] + ring + 1) as f64 * self.cell;
                    bound = bound.min(face - p[a]);
                }
            }
            if bound == f64::INFINITY || (bound > 0.0 && best <= bound * bound) {
                return best;
            }
            ring += 1;
        }
    }
}

/// Earth mover's distance between equal-size clouds: the minimum mean
/// Euclidean matching cost, solved exactly.
pub fn emd(a: &ParticleCloud, b: &ParticleCloud) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GicError::invalid(format!(
            "EMD needs equal-size clouds, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(GicError::invalid("EMD needs nonempty clouds"));
    }
    if a.len() > EMD_MAX_POINTS {
        return Err(GicError::invalid(format!(
            "EMD limited to {EMD_MAX_POINTS} points, got {}",
            a.len()
        )));
    }
    let n = a.len();
    let cost: Vec<f64> = a
        .positions
        .iter()
        .flat_map(|p| b.positions.iter().map(move |q| (p - q).norm()))
        .collect();
    let assignment = hungarian(&cost, n);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok(total / n as f64)
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix
/// (shortest augmenting paths with potentials). Returns the column
/// assigned to each row.
pub fn hungarian(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based rows/columns; column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        row_of[0] = row;
        let mut col0 = 0usize;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = row_of[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[(r - 1) * n + (col - 1)] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    way[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[row_of[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = col1;
            if row_of[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            row_of[col0] = row_of[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for col in 1..=n {
        if row_of[col] > 0 {
            assignment[row_of[col] - 1] = col - 1;
        }
    }
    assignment
}
