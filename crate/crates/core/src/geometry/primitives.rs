//! Regular particle lattices for synthetic scenes and tests.

use super::points::{GicParticle, GicParticleSet};
use crate::Vec3;

/// Opacity given to the outermost lattice layer. It lies inside the default
/// surface band so those particles are tracked as the observed surface.
pub const LATTICE_SURFACE_OPACITY: f64 = 0.65;

fn lattice(
    lo: Vec3,
    hi: Vec3,
    spacing: f64,
    inside: impl Fn(&Vec3) -> bool,
    on_surface: impl Fn(&Vec3) -> bool,
) -> GicParticleSet {
    let n = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / spacing).floor().max(0.0) as usize + 1);
    let mut particles = Vec::new();
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let x = lo + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                if !inside(&x) {
                    continue;
                }
                particles.push(GicParticle {
                    position: x,
                    scale: 0.5 * spacing,
                    opacity: if on_surface(&x) { LATTICE_SURFACE_OPACITY } else { 1.0 },
                });
            }
        }
    }
    GicParticleSet { particles }
}

/// Particles on a cubic lattice filling the box `[lo, hi]`, one per
/// `spacing³` cell, with scale `spacing / 2`.
pub fn lattice_box(lo: Vec3, hi: Vec3, spacing: f64) -> GicParticleSet {
    let tol = 1e-9 * spacing;
    let [nx, ny, nz] = [0, 1, 2].map(|a| ((hi[a] - lo[a]) / spacing + 1e-9).floor());
    let top = lo + Vec3::new(nx, ny, nz) * spacing;
    lattice(
        lo,
        hi + Vec3::repeat(tol),
        spacing,
        |_| true,
        |x| (0..3).any(|a| (x[a] - lo[a]).abs() < tol || (x[a] - top[a]).abs() < tol),
    )
}

/// Lattice particles inside a ball; the layer within one spacing of the
/// sphere is marked as surface.
pub fn lattice_sphere(center: Vec3, radius: f64, spacing: f64) -> GicParticleSet {
    let m = (radius / spacing).floor() * spacing;
    lattice(
        center - Vec3::repeat(m),
        center + Vec3::repeat(m + 1e-9 * spacing),
        spacing,
        |x| (x - center).norm() <= radius + 1e-9 * spacing,
        |x| (x - center).norm() > radius - spacing,
    )
}
