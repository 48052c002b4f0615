use std::f64::consts::PI;

use gic_core::geometry::{fill_object, FillConfig, GaussianPoint, GaussianPointSet};
use gic_core::splat::Camera;
use gic_core::Vec3;

fn unit_sphere(n: usize) -> GaussianPointSet {
    let golden = PI * (3.0 - 5f64.sqrt());
    GaussianPointSet::new(
        (0..n)
            .map(|i| {
                let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - y * y).sqrt();
                let phi = golden * i as f64;
                GaussianPoint::new(Vec3::new(r * phi.cos(), y, r * phi.sin()), 0.02, 1.0, [0.8; 3])
            })
            .collect(),
    )
}

fn axis_cameras() -> Vec<Camera> {
    (0..3)
        .flat_map(|a| {
            [-1.0, 1.0].map(|s| {
                let mut d = Vec3::zeros();
                d[a] = s;
                let up = if a == 1 { Vec3::z() } else { Vec3::y() };
                Camera::look_at(d * 4.0, Vec3::zeros(), up, 200.0, 128, 128)
            })
        })
        .collect()
}

#[test]
fn unit_sphere_fill_stays_within_one_coarse_shell() {
    let cfg = FillConfig::default();
    let out = fill_object(&unit_sphere(20_000), &axis_cameras(), &cfg).unwrap();
    let h = cfg.final_cell_size();
    let exact = 4.0 / 3.0 * PI;
    let volume = out.continuum.len() as f64 * h.powi(3);
    // no erosion, and at most the shell of coarse voxels cut by the surface
    let outer = 4.0 / 3.0 * PI * (1.0 + cfg.dx * 3f64.sqrt()).powi(3);
    assert!(volume > exact && volume < outer, "{volume}");
    let limit = cfg.dx * 3f64.sqrt() + 2.0 * h * 3f64.sqrt();
    for p in &out.surface.positions {
        assert!((p.norm() - 1.0).abs() <= limit, "{}", p.norm());
    }
}

#[test]
fn fill_is_reproducible_per_seed() {
    let g = unit_sphere(2_000);
    let cfg = FillConfig {
        dx: 0.2,
        n_u: 2,
        n_internal: 20_000,
        seed: 11,
        ..FillConfig::default()
    };
    let a = fill_object(&g, &axis_cameras(), &cfg).unwrap();
    let b = fill_object(&g, &axis_cameras(), &cfg).unwrap();
    assert_eq!(a.particles, b.particles);
    assert_eq!(a.internal, b.internal);
}
