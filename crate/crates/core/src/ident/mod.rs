//! Losses, metrics and the two-stage parameter identification loop.

pub mod adam;
mod identify;
mod loss;
mod metrics;

pub use adam::Adam;
pub use identify::{
    centroid_velocity, estimate_velocity, evaluate_loss, fd_gradient, identify, identify_repeated,
    mae_x100, synthesize_observation, AdamConfig, IdentConfig, IdentResult, LossRecord, RunSummary,
};
pub use loss::{mask_l1, rollout_loss, LossBreakdown, ObservedFrame, Observation};
pub use metrics::{chamfer_distance, emd, hungarian, EMD_MAX_POINTS};
