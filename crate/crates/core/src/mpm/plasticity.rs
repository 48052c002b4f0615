//! Return mappings that project trial deformation gradients back onto (or
//! toward) the elastic region.

use super::constitutive::svd3;
use crate::error::{GicError, Result};
use crate::{Mat3, Vec3};

const DIM: f64 = 3.0;

/// Hencky strain `ε = log Σ` and the SVD factors of `F`.
struct Hencky {
    u: Mat3,
    v_t: Mat3,
    sigma: Vec3,
    eps: Vec3,
    trace: f64,
    dev: Vec3,
    dev_norm: f64,
}

impl Hencky {
    fn of(f: &Mat3) -> Result<Self> {
        let (u, sigma, v_t) = svd3(f)?;
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(GicError::InvertedElement { det: f.determinant() });
        }
        let eps = sigma.map(f64::ln);
        let trace = eps.sum();
        let dev = eps - Vec3::repeat(trace / DIM);
        Ok(Self {
            u,
            v_t,
            sigma,
            eps,
            trace,
            dev,
            dev_norm: dev.norm(),
        })
    }

    fn compose(&self, eps: &Vec3) -> Mat3 {
        self.u * Mat3::from_diagonal(&eps.map(f64::exp)) * self.v_t
    }
}

fn check_det(f: &Mat3) -> Result<()> {
    let det = f.determinant();
    if !det.is_finite() {
        return Err(GicError::InvalidState("non-finite deformation gradient".into()));
    }
    if det <= 0.0 {
        return Err(GicError::InvertedElement { det });
    }
    Ok(())
}

/// Deviatoric Hencky strain norm `‖ε̂‖` of a deformation gradient.
pub fn deviatoric_hencky_norm(f: &Mat3) -> Result<f64> {
    Ok(Hencky::of(f)?.dev_norm)
}

/// Von Mises yield function `‖ε̂‖ − τ_Y / 2μ` (positive means yielding).
pub fn von_mises_yield(f: &Mat3, mu: f64, tau_y: f64) -> Result<f64> {
    Ok(Hencky::of(f)?.dev_norm - tau_y / (2.0 * mu))
}

/// Drucker–Prager friction coefficient for a friction angle in degrees.
pub fn drucker_prager_alpha(theta_fric_deg: f64) -> f64 {
    let s = theta_fric_deg.to_radians().sin();
    (2.0f64 / 3.0).sqrt() * 2.0 * s / (3.0 - s)
}

/// Drucker–Prager `δγ = ‖ε̂‖ + α (dλ + 2μ) tr(ε) / 2μ` and `tr(ε)`.
pub fn drucker_prager_yield(f: &Mat3, mu: f64, lambda: f64, theta_fric_deg: f64) -> Result<(f64, f64)> {
    let h = Hencky::of(f)?;
    let alpha = drucker_prager_alpha(theta_fric_deg);
    Ok((
        h.dev_norm + alpha * (DIM * lambda + 2.0 * mu) * h.trace / (2.0 * mu),
        h.trace,
    ))
}

/// Von Mises projection: deviatoric Hencky strain is scaled back to
/// `‖ε̂‖ = τ_Y / 2μ` when it exceeds it.
pub fn return_map_von_mises(f: &Mat3, mu: f64, tau_y: f64) -> Result<Mat3> {
    check_det(f)?;
    let h = Hencky::of(f)?;
    let delta_gamma = h.dev_norm - tau_y / (2.0 * mu);
    if delta_gamma <= 0.0 {
        return Ok(*f);
    }
    let eps = h.eps - h.dev * (delta_gamma / h.dev_norm);
    Ok(h.compose(&eps))
}

/// Drucker–Prager projection for granular media: expansion loses all
/// stress, compressive states outside the cone are projected onto it.
pub fn return_map_drucker_prager(f: &Mat3, mu: f64, lambda: f64, theta_fric_deg: f64) -> Result<Mat3> {
    check_det(f)?;
    let h = Hencky::of(f)?;
    if h.trace > 0.0 {
        return Ok(h.u * h.v_t);
    }
    let alpha = drucker_prager_alpha(theta_fric_deg);
    let delta_gamma = h.dev_norm + alpha * (DIM * lambda + 2.0 * mu) * h.trace / (2.0 * mu);
    if delta_gamma <= 0.0 {
        return Ok(*f);
    }
    let eps = h.eps - h.dev * (delta_gamma / h.dev_norm);
    Ok(h.compose(&eps))
}

/// Viscoplastic (Herschel–Bulkley-like) relaxation toward the von Mises
/// surface. The overstress `δγ = ‖s‖ − τ_Y` with `s = 2μ ε̂` is only removed
/// in part, by the factor `1 / (1 + η / (2 μ̂ Δt))`; `η = 0` reproduces
/// [`return_map_von_mises`].
pub fn return_map_viscoplastic(f: &Mat3, mu: f64, tau_y: f64, eta: f64, dt: f64) -> Result<Mat3> {
    check_det(f)?;
    if !(dt > 0.0) {
        return Err(GicError::invalid(format!("dt must be positive, got {dt}")));
    }
    let h = Hencky::of(f)?;
    let s_norm = 2.0 * mu * h.dev_norm;
    let delta_gamma = s_norm - tau_y;
    if delta_gamma <= 0.0 {
        return Ok(*f);
    }
    let mu_hat = mu / DIM * h.sigma.norm_squared();
    let s_hat = s_norm - delta_gamma / (1.0 + eta / (2.0 * mu_hat * dt));
    let eps = h.dev * (s_hat / (2.0 * mu) / h.dev_norm) + Vec3::repeat(h.trace / DIM);
    Ok(h.compose(&eps))
}
