//! MLS-MPM simulation with five constitutive models.

pub mod constitutive;
mod material;
pub mod plasticity;
mod sim;

pub use constitutive::{
    hencky_stress, lame_from_young_poisson, neo_hookean_stress, newtonian_stress,
    stvk_hencky_stress, young_poisson_from_lame,
};
pub use material::{MaterialKind, MaterialSpec, ParamId};
pub use plasticity::{
    deviatoric_hencky_norm, drucker_prager_alpha, drucker_prager_yield, return_map_drucker_prager,
    return_map_viscoplastic, return_map_von_mises, von_mises_yield,
};
pub use sim::{
    energy_audit, simulate, simulate_with_dt, step, Ground, GridSpec, Particle, SimConfig,
    SimState, Simulator, Trajectory, WALL_CELLS,
};
