//! Gaussian-informed continuum toolkit.
//!
//! Turns Gaussian point sets into simulatable continuum particles
//! ([`geometry`]), renders them with isotropic splatting ([`splat`]),
//! simulates them with MLS-MPM under five constitutive models ([`mpm`]) and
//! estimates physical parameters from surfaces and masks ([`ident`]).

pub mod deform;
pub mod error;
pub mod geometry;
pub mod ident;
pub mod io;
pub mod mpm;
pub mod rng;
pub mod splat;

pub use error::{GicError, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

pub use geometry::{
    DensityField, FillConfig, GaussianPoint, GaussianPointSet, GicParticle, GicParticleSet,
    ParticleCloud, TriangleMesh,
};
pub use ident::{IdentConfig, IdentResult, Observation};
pub use mpm::{MaterialKind, MaterialSpec, SimConfig, SimState, Trajectory};
pub use splat::{Camera, RenderOutput, Splat2D};
