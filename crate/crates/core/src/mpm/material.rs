use serde::{Deserialize, Serialize};

use crate::error::{GicError, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Elastic,
    Plasticine,
    Granular,
    Newtonian,
    NonNewtonian,
}

impl MaterialKind {
    pub const ALL: [MaterialKind; 5] = [
        MaterialKind::Elastic,
        MaterialKind::Plasticine,
        MaterialKind::Granular,
        MaterialKind::Newtonian,
        MaterialKind::NonNewtonian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaterialKind::Elastic => "elastic",
            MaterialKind::Plasticine => "plasticine",
            MaterialKind::Granular => "granular",
            MaterialKind::Newtonian => "newtonian",
            MaterialKind::NonNewtonian => "non_newtonian",
        }
    }

    pub fn is_fluid(self) -> bool {
        matches!(self, MaterialKind::Newtonian)
    }

    /// Parameters estimated for this material.
    pub fn identified_params(self) -> &'static [ParamId] {
        use ParamId::*;
        match self {
            MaterialKind::Elastic => &[YoungsModulus, PoissonRatio],
            MaterialKind::Plasticine => &[YoungsModulus, PoissonRatio, YieldStress],
            MaterialKind::Granular => &[FrictionAngle],
            MaterialKind::Newtonian => &[FluidViscosity, BulkModulus],
            MaterialKind::NonNewtonian => {
                &[ShearModulus, BulkModulus, YieldStress, PlasticViscosity]
            }
        }
    }
}

impl std::str::FromStr for MaterialKind {
    type Err = GicError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        MaterialKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || (norm == "sand" && *k == MaterialKind::Granular))
            .ok_or_else(|| GicError::invalid(format!("unknown material kind '{s}'")))
    }
}

/// One scalar physical parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    YoungsModulus,
    PoissonRatio,
    YieldStress,
    FrictionAngle,
    FluidViscosity,
    ShearModulus,
    BulkModulus,
    PlasticViscosity,
}

impl ParamId {
    pub fn name(self) -> &'static str {
        match self {
            ParamId::YoungsModulus => "E",
            ParamId::PoissonRatio => "nu",
            ParamId::YieldStress => "tau_y",
            ParamId::FrictionAngle => "theta_fric",
            ParamId::FluidViscosity => "mu",
            ParamId::ShearModulus => "mu",
            ParamId::BulkModulus => "kappa",
            ParamId::PlasticViscosity => "eta",
        }
    }

    /// Stiffness-like parameters spanning decades are optimized as log10.
    pub fn is_log_scaled(self) -> bool {
        !matches!(self, ParamId::PoissonRatio | ParamId::FrictionAngle)
    }

    pub fn get(self, m: &MaterialSpec) -> f64 {
        match self {
            ParamId::YoungsModulus => m.youngs_modulus,
            ParamId::PoissonRatio => m.poisson_ratio,
            ParamId::YieldStress => m.yield_stress,
            ParamId::FrictionAngle => m.friction_angle,
            ParamId::FluidViscosity => m.fluid_viscosity,
            ParamId::ShearModulus => m.shear_modulus,
            ParamId::BulkModulus => m.bulk_modulus,
            ParamId::PlasticViscosity => m.plastic_viscosity,
        }
    }

    pub fn set(self, m: &mut MaterialSpec, value: f64) {
        let slot = match self {
            ParamId::YoungsModulus => &mut m.youngs_modulus,
            ParamId::PoissonRatio => &mut m.poisson_ratio,
            ParamId::YieldStress => &mut m.yield_stress,
            ParamId::FrictionAngle => &mut m.friction_angle,
            ParamId::FluidViscosity => &mut m.fluid_viscosity,
            ParamId::ShearModulus => &mut m.shear_modulus,
            ParamId::BulkModulus => &mut m.bulk_modulus,
            ParamId::PlasticViscosity => &mut m.plastic_viscosity,
        };
        *slot = value;
    }
}

/// Constitutive model plus its parameters. Fields not used by `kind` are
/// ignored by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialSpec {
    pub kind: MaterialKind,
    /// Young's modulus E (Pa); elastic backbone for elastic, plasticine and granular.
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    /// Poisson's ratio ν.
    #[serde(rename = "nu")]
    pub poisson_ratio: f64,
    /// Yield stress τ_Y (Pa).
    #[serde(rename = "tau_y")]
    pub yield_stress: f64,
    /// Friction angle θ_fric (degrees).
    #[serde(rename = "theta_fric")]
    pub friction_angle: f64,
    /// Newtonian fluid viscosity μ (Pa·s).
    #[serde(rename = "mu_fluid")]
    pub fluid_viscosity: f64,
    /// Non-Newtonian shear modulus μ (Pa).
    #[serde(rename = "mu_shear")]
    pub shear_modulus: f64,
    /// Bulk modulus κ (Pa).
    #[serde(rename = "kappa")]
    pub bulk_modulus: f64,
    /// Plastic viscosity η (Pa·s).
    #[serde(rename = "eta")]
    pub plastic_viscosity: f64,
    /// Initial velocity (m/s).
    pub v0: Vec3,
    /// Mass density ρ (kg/m³).
    pub density: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        Self {
            kind: MaterialKind::Elastic,
            youngs_modulus: 1e5,
            poisson_ratio: 0.3,
            yield_stress: 1e3,
            friction_angle: 30.0,
            fluid_viscosity: 10.0,
            shear_modulus: 100.0,
            bulk_modulus: 1e4,
            plastic_viscosity: 1.0,
            v0: Vec3::zeros(),
            density: 1000.0,
        }
    }
}

impl MaterialSpec {
    pub fn elastic(e: f64, nu: f64) -> Self {
        Self {
            kind: MaterialKind::Elastic,
            youngs_modulus: e,
            poisson_ratio: nu,
            ..Self::default()
        }
    }

    pub fn plasticine(e: f64, nu: f64, tau_y: f64) -> Self {
        Self {
            kind: MaterialKind::Plasticine,
            youngs_modulus: e,
            poisson_ratio: nu,
            yield_stress: tau_y,
            ..Self::default()
        }
    }

    /// Granular media on an elastic backbone of E = 1e5 Pa, ν = 0.3.
    pub fn granular(theta_fric: f64) -> Self {
        Self {
            kind: MaterialKind::Granular,
            youngs_modulus: 1e5,
            poisson_ratio: 0.3,
            friction_angle: theta_fric,
            ..Self::default()
        }
    }

    pub fn newtonian(mu: f64, kappa: f64) -> Self {
        Self {
            kind: MaterialKind::Newtonian,
            fluid_viscosity: mu,
            bulk_modulus: kappa,
            ..Self::default()
        }
    }

    pub fn non_newtonian(mu: f64, kappa: f64, tau_y: f64, eta: f64) -> Self {
        Self {
            kind: MaterialKind::NonNewtonian,
            shear_modulus: mu,
            bulk_modulus: kappa,
            yield_stress: tau_y,
            plastic_viscosity: eta,
            ..Self::default()
        }
    }

    /// Initial guesses used to start identification.
    pub fn initial_guess(kind: MaterialKind) -> Self {
        match kind {
            MaterialKind::Newtonian => Self::newtonian(10.0, 1.0e4),
            MaterialKind::NonNewtonian => Self::non_newtonian(100.0, 1.0e5, 10.0, 1.0),
            MaterialKind::Elastic => Self::elastic(316_227.77, 0.25),
            MaterialKind::Plasticine => Self::plasticine(10_000.0, 0.25, 1000.0),
            MaterialKind::Granular => Self::granular(10.0),
        }
    }

    pub fn with_velocity(mut self, v0: Vec3) -> Self {
        self.v0 = v0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GicError::invalid(msg));
        if !(self.density > 0.0) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if !self.v0.iter().all(|v| v.is_finite()) {
            return bad("initial velocity must be finite".into());
        }
        let needs_elastic = matches!(
            self.kind,
            MaterialKind::Elastic | MaterialKind::Plasticine | MaterialKind::Granular
        );
        if needs_elastic {
            if !(self.youngs_modulus > 0.0) {
                return bad(format!("E must be positive, got {}", self.youngs_modulus));
            }
            if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
                return bad(format!("nu must lie in (0, 0.5), got {}", self.poisson_ratio));
            }
        }
        match self.kind {
            MaterialKind::Plasticine | MaterialKind::NonNewtonian if !(self.yield_stress >= 0.0) => {
                return bad(format!("tau_y must be non-negative, got {}", self.yield_stress));
            }
            MaterialKind::Granular
                if !(self.friction_angle > 0.0 && self.friction_angle < 90.0) =>
            {
                return bad(format!(
                    "theta_fric must lie in (0, 90) degrees, got {}",
                    self.friction_angle
                ));
            }
            _ => {}
        }
        if matches!(self.kind, MaterialKind::Newtonian | MaterialKind::NonNewtonian)
            && !(self.bulk_modulus > 0.0)
        {
            return bad(format!("kappa must be positive, got {}", self.bulk_modulus));
        }
        if self.kind == MaterialKind::Newtonian && !(self.fluid_viscosity >= 0.0) {
            return bad(format!("mu must be non-negative, got {}", self.fluid_viscosity));
        }
        if self.kind == MaterialKind::NonNewtonian {
            if !(self.shear_modulus > 0.0) {
                return bad(format!("mu must be positive, got {}", self.shear_modulus));
            }
            if !(self.plastic_viscosity >= 0.0) {
                return bad(format!("eta must be non-negative, got {}", self.plastic_viscosity));
            }
        }
        Ok(())
    }

    /// Lamé parameters of the elastic backbone.
    pub fn lame(&self) -> Result<(f64, f64)> {
        super::constitutive::lame_from_young_poisson(self.youngs_modulus, self.poisson_ratio)
    }

    /// Upper bound on the dilatational wave speed (m/s), used to pick stable time steps.
    pub fn wave_speed(&self) -> f64 {
        let stiffness = match self.kind {
            MaterialKind::Elastic | MaterialKind::Plasticine | MaterialKind::Granular => {
                let (mu, lambda) = self.lame().unwrap_or((0.0, 0.0));
                lambda + 2.0 * mu
            }
            // κ(J - J⁻⁶) linearizes to 7κ at J = 1
            MaterialKind::Newtonian => 7.0 * self.bulk_modulus,
            MaterialKind::NonNewtonian => self.bulk_modulus + 4.0 / 3.0 * self.shear_modulus,
        };
        (stiffness / self.density).sqrt()
    }
}
