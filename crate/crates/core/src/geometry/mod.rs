//! Coarse-to-fine filling of Gaussian point sets into continuum particles.

mod field;
mod fill;
mod mesh;
mod points;
mod primitives;

pub use field::{mean_filter, upsample_trilinear, DensityField};
pub use fill::{
    coarse_to_fine_fill, extract_continuum, extract_surface, fill_object, filter_internal,
    make_gaussian_informed, sample_bbox_particles, FillConfig, FillOutput, FIELD_PADDING_CELLS,
};
pub use mesh::{export_mesh, TriangleMesh};
pub use points::{GaussianPoint, GaussianPointSet, GicParticle, GicParticleSet, ParticleCloud};
pub use primitives::{lattice_box, lattice_sphere, LATTICE_SURFACE_OPACITY};
