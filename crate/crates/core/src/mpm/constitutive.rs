//! Kirchhoff stress (Jσ) of the supported constitutive models.

use nalgebra::SVD;

use crate::error::{GicError, Result};
use crate::{Mat3, Vec3};

/// Lamé parameters `(μ, λ)` from Young's modulus and Poisson's ratio.
pub fn lame_from_young_poisson(e: f64, nu: f64) -> Result<(f64, f64)> {
    if !(e > 0.0) {
        return Err(GicError::SingularParameter(format!("E must be positive, got {e}")));
    }
    if !(nu < 0.5 && nu > -1.0) {
        return Err(GicError::SingularParameter(format!(
            "Poisson's ratio {nu} makes the Lamé parameters singular"
        )));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((mu, lambda))
}

/// Inverse of [`lame_from_young_poisson`].
pub fn young_poisson_from_lame(mu: f64, lambda: f64) -> (f64, f64) {
    let e = mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu);
    let nu = lambda / (2.0 * (lambda + mu));
    (e, nu)
}

fn checked_det(f: &Mat3) -> Result<f64> {
    let j = f.determinant();
    if !(j > 0.0) {
        return Err(GicError::InvertedElement { det: j });
    }
    Ok(j)
}

/// Neo-Hookean: `Jσ = μ F Fᵀ + (λ log J − μ) I`.
pub fn neo_hookean_stress(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3> {
    let j = checked_det(f)?;
    Ok(f * f.transpose() * mu + Mat3::identity() * (lambda * j.ln() - mu))
}

/// St. Venant–Kirchhoff: `Jσ = F (2μ G + λ tr(G) I) Fᵀ` with Green strain
/// `G = ½(FᵀF − I)`.
pub fn stvk_hencky_stress(f: &Mat3, mu: f64, lambda: f64) -> Result<Mat3> {
    checked_det(f)?;
    let g = (f.transpose() * f - Mat3::identity()) * 0.5;
    let inner = g * (2.0 * mu) + Mat3::identity() * (lambda * g.trace());
    Ok(f * inner * f.transpose())
}

/// J-based fluid with viscosity: `Jσ = ½μ(∇v + ∇vᵀ) + κ(J − J⁻⁶) I`.
pub fn newtonian_stress(grad_v: &Mat3, j: f64, mu: f64, kappa: f64) -> Result<Mat3> {
    if !(j > 0.0) {
        return Err(GicError::InvalidState(format!("volume ratio J = {j} must be positive")));
    }
    let viscous = (grad_v + grad_v.transpose()) * (0.5 * mu);
    Ok(viscous + Mat3::identity() * (kappa * (j - j.powi(-6))))
}

/// Singular value decomposition with a finiteness check.
pub(crate) fn svd3(f: &Mat3) -> Result<(Mat3, Vec3, Mat3)> {
    if !f.iter().all(|v| v.is_finite()) {
        return Err(GicError::InvalidState("non-finite deformation gradient".into()));
    }
    let svd = SVD::new(*f, true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok((u, svd.singular_values, v_t)),
        _ => Err(GicError::InvalidState("SVD failed".into())),
    }
}

/// Hencky-strain Kirchhoff stress used as the elastic trial response of the
/// viscoplastic fluid: `U (2μ ε̂ + κ tr(ε) I) Uᵀ`.
pub fn hencky_stress(f: &Mat3, mu: f64, kappa: f64) -> Result<Mat3> {
    checked_det(f)?;
    let (u, sigma, _) = svd3(f)?;
    let eps = sigma.map(f64::ln);
    let tr = eps.sum();
    let dev = eps - Vec3::repeat(tr / 3.0);
    let diag = dev * (2.0 * mu) + Vec3::repeat(kappa * tr);
    Ok(u * Mat3::from_diagonal(&diag) * u.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    fn close(a: &Mat3, b: &Mat3, tol: f64) -> bool {
        (a - b).abs().max() <= tol
    }

    #[test]
    fn torus_lame_values() {
        let (mu, lambda) = lame_from_young_poisson(1e6, 0.3).unwrap();
        assert!((mu - 384_615.384_615_384_6).abs() < 1e-6);
        assert!((lambda - 576_923.076_923_077).abs() < 1e-6);
        let (mu, lambda) = lame_from_young_poisson(2e5, 0.0).unwrap();
        assert_eq!(lambda, 0.0);
        assert_eq!(mu, 1e5);
        assert!(matches!(
            lame_from_young_poisson(1e6, 0.5),
            Err(GicError::SingularParameter(_))
        ));
    }

    #[test]
    fn lame_round_trip() {
        for &(e, nu) in &[(1e6, 0.3), (316_227.77, 0.25), (1e2, 0.45), (5e6, 0.05)] {
            let (mu, lambda) = lame_from_young_poisson(e, nu).unwrap();
            let (e2, nu2) = young_poisson_from_lame(mu, lambda);
            assert!(((e2 - e) / e).abs() < 1e-10);
            assert!(((nu2 - nu) / nu).abs() < 1e-10);
        }
    }

    #[test]
    fn rest_state_is_stress_free() {
        let i = Mat3::identity();
        assert_eq!(neo_hookean_stress(&i, 3e5, 5e5).unwrap(), Mat3::zeros());
        assert_eq!(stvk_hencky_stress(&i, 3e5, 5e5).unwrap(), Mat3::zeros());
        assert_eq!(newtonian_stress(&Mat3::zeros(), 1.0, 200.0, 1e5).unwrap(), Mat3::zeros());
        assert_eq!(hencky_stress(&i, 100.0, 1e5).unwrap().abs().max(), 0.0);
    }

    #[test]
    fn neo_hookean_uniform_stretch() {
        let (mu, lambda, c) = (3e5, 5e5, 1.02);
        let s = neo_hookean_stress(&(Mat3::identity() * c), mu, lambda).unwrap();
        let d = mu * c * c + lambda * 3.0 * c.ln() - mu;
        assert!(close(&s, &(Mat3::identity() * d), 1e-9 * d.abs()));
    }

    #[test]
    fn stvk_uniaxial_stretch() {
        let (mu, lambda) = (3e5, 5e5);
        let f = Mat3::from_diagonal(&Vec3::new(1.1, 1.0, 1.0));
        let s = stvk_hencky_stress(&f, mu, lambda).unwrap();
        let g = 0.5 * (1.1f64 * 1.1 - 1.0); // 0.105
        let expect = Mat3::from_diagonal(&Vec3::new(
            1.21 * (2.0 * mu * g + lambda * g),
            lambda * g,
            lambda * g,
        ));
        assert!(close(&s, &expect, 1e-6));
    }

    #[test]
    fn newtonian_cases() {
        let mut gv = Mat3::zeros();
        gv[(0, 1)] = 1.0;
        let s = newtonian_stress(&gv, 1.0, 200.0, 1e5).unwrap();
        assert_eq!(s[(0, 1)], 100.0);
        assert_eq!(s[(1, 0)], 100.0);
        assert_eq!(s[(0, 0)], 0.0);
        let s = newtonian_stress(&Mat3::zeros(), 0.9, 200.0, 1e5).unwrap();
        let p = 1e5 * (0.9 - 0.9f64.powi(-6));
        assert!((s[(0, 0)] - p).abs() < 1e-9);
        assert!((p - -9.8168e4).abs() < 1e1, "{p}");
        assert!(newtonian_stress(&Mat3::zeros(), 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn inverted_elements_are_rejected() {
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!(matches!(neo_hookean_stress(&f, 1.0, 1.0), Err(GicError::InvertedElement { .. })));
        assert!(stvk_hencky_stress(&f, 1.0, 1.0).is_err());
    }

    fn arb_f() -> impl Strategy<Value = Mat3> {
        proptest::array::uniform9(-0.3f64..0.3).prop_map(|a| Mat3::identity() + Mat3::from_row_slice(&a))
            .prop_filter("positive determinant", |f| f.determinant() > 0.1)
    }

    proptest! {
        #[test]
        fn stresses_are_symmetric(f in arb_f()) {
            let a = neo_hookean_stress(&f, 3e5, 5e5).unwrap();
            let b = stvk_hencky_stress(&f, 3e5, 5e5).unwrap();
            prop_assert!(close(&a, &a.transpose(), 1e-9 * a.abs().max().max(1.0)));
            prop_assert!(close(&b, &b.transpose(), 1e-9 * b.abs().max().max(1.0)));
        }

        #[test]
        fn stresses_are_rotation_equivariant(f in arb_f(), axis in proptest::array::uniform3(-1.0f64..1.0), angle in -3.0f64..3.0) {
            let axis = Vec3::from(axis);
            prop_assume!(axis.norm() > 1e-3);
            let r = *Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).matrix();
            let (mu, lambda) = (3e5, 5e5);
            for stress in [neo_hookean_stress, stvk_hencky_stress] {
                let lhs = stress(&(r * f), mu, lambda).unwrap();
                let rhs = r * stress(&f, mu, lambda).unwrap() * r.transpose();
                // relative to the stress magnitude (~1e5 Pa)
                prop_assert!(close(&lhs, &rhs, 1e-8 * rhs.abs().max().max(1.0)));
            }
        }
    }
}
