//! Isotropic Gaussian projection and front-to-back alpha blending.

mod camera;
mod render;

pub use camera::{Camera, NEAR_PLANE};
pub use render::{
    blend_pixel, project_gaussian, render, render_depth_only, render_mask, DepthImage,
    RenderOutput, Splat2D, Splattable, ALPHA_MAX, COV2D_REGULARIZATION,
};
