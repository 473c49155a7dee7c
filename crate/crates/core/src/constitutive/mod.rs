//! Elastic stress models, plastic return maps and the stress sensitivity to
//! log Young's modulus.
//!
//! Every stress is returned in Kirchhoff form, `τ = (∂Φ/∂F) Fᵀ`, which is what
//! the MLS-MPM momentum update consumes.

mod elastic;
mod plastic;
pub mod svd;

pub use elastic::{elastic_basis, elastic_stress, stress_and_sensitivity};
pub use plastic::{drucker_prager_alpha, plastic_return, von_mises_yield_strain, SIGMA_J_MAX, SIGMA_J_MIN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("inverted element: det(F) = {det:e}")]
    Inverted { det: f64 },
    #[error("poisson ratio {0} is at or above 0.5 (incompressible limit)")]
    Incompressible(f64),
    #[error("young's modulus must be positive, got {0}")]
    NonPositiveYoung(f64),
    #[error("poisson ratio must be non-negative, got {0}")]
    NegativePoisson(f64),
    #[error("invalid material for label {label}: {message}")]
    InvalidMaterial { label: i32, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Elasticity {
    /// Hencky strain, `τ = U diag(2με + λ tr ε) Uᵀ`.
    Sigma,
    Corotated,
    /// Green-Lagrange strain.
    #[serde(rename = "stvk")]
    StVK,
    #[serde(rename = "neohookean")]
    NeoHookean,
    Fluid,
    Volume,
}

impl Elasticity {
    pub const ALL: [Elasticity; 6] = [
        Elasticity::Sigma,
        Elasticity::Corotated,
        Elasticity::StVK,
        Elasticity::NeoHookean,
        Elasticity::Fluid,
        Elasticity::Volume,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plasticity {
    Identity,
    /// Clamps J into [0.05, 1.2] and keeps only the volumetric part.
    Sigma,
    VonMises,
    DruckerPrager,
    Fluid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LameParams {
    pub mu: f64,
    pub lambda: f64,
}

/// `μ = E / (2(1+ν))`, `λ = Eν / ((1+ν)(1−2ν))`.
pub fn lame_from(young: f64, poisson: f64) -> Result<LameParams, ConstitutiveError> {
    if !(young > 0.0) {
        return Err(ConstitutiveError::NonPositiveYoung(young));
    }
    if !(poisson >= 0.0) {
        return Err(ConstitutiveError::NegativePoisson(poisson));
    }
    if poisson >= 0.5 {
        return Err(ConstitutiveError::Incompressible(poisson));
    }
    Ok(LameParams {
        mu: young / (2.0 * (1.0 + poisson)),
        lambda: young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)),
    })
}

/// Largest Poisson ratio accepted by material validation.
pub const MAX_POISSON: f64 = 0.499;

/// Per-instance material.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialParams {
    pub label: i32,
    pub density: f64,
    pub poisson: f64,
    pub young: f64,
    pub elasticity: Elasticity,
    pub plasticity: Plasticity,
    pub yield_stress: f64,
    /// Degrees.
    pub friction_angle: f64,
    pub cohesion: f64,
}

impl MaterialParams {
    pub fn new(
        label: i32,
        elasticity: Elasticity,
        plasticity: Plasticity,
        density: f64,
        poisson: f64,
        young: f64,
    ) -> Self {
        Self {
            label,
            density,
            poisson,
            young,
            elasticity,
            plasticity,
            yield_stress: 0.0,
            friction_angle: 0.0,
            cohesion: 0.0,
        }
    }

    pub fn lame(&self) -> Result<LameParams, ConstitutiveError> {
        lame_from(self.young, self.poisson)
    }

    pub fn log_young(&self) -> f64 {
        self.young.ln()
    }

    pub fn validate(&self) -> Result<(), ConstitutiveError> {
        let bad = |message: String| Err(ConstitutiveError::InvalidMaterial { label: self.label, message });
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return bad(format!("poisson must be in (0, 0.5), got {}", self.poisson));
        }
        if self.poisson > MAX_POISSON {
            return bad(format!("poisson must not exceed {MAX_POISSON}, got {}", self.poisson));
        }
        if !(self.young > 0.0 && self.young.is_finite()) {
            return bad(format!("young must be positive, got {}", self.young));
        }
        if !(self.yield_stress >= 0.0) {
            return bad(format!("yield_stress must be non-negative, got {}", self.yield_stress));
        }
        if !(self.cohesion >= 0.0) {
            return bad(format!("cohesion must be non-negative, got {}", self.cohesion));
        }
        if !(self.friction_angle >= 0.0 && self.friction_angle < 90.0) {
            return bad(format!("friction_angle must be in [0, 90) degrees, got {}", self.friction_angle));
        }
        Ok(())
    }
}

/// Named starting points standing in for a predicted material. Values are
/// plausible desk-scale choices, not measured data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Rubber,
    Jelly,
    Sand,
    Water,
    Metal,
    Snow,
}

impl Preset {
    pub fn material(self, label: i32) -> MaterialParams {
        use Elasticity as E;
        use Plasticity as P;
        match self {
            Preset::Rubber => MaterialParams::new(label, E::NeoHookean, P::Identity, 1100.0, 0.45, 1e6),
            Preset::Jelly => MaterialParams::new(label, E::Corotated, P::Identity, 1000.0, 0.3, 5e4),
            Preset::Sand => MaterialParams {
                friction_angle: 30.0,
                ..MaterialParams::new(label, E::Sigma, P::DruckerPrager, 1600.0, 0.3, 2e5)
            },
            Preset::Water => MaterialParams::new(label, E::Fluid, P::Fluid, 1000.0, 0.3, 1e5),
            Preset::Metal => MaterialParams {
                yield_stress: 2e4,
                ..MaterialParams::new(label, E::Sigma, P::VonMises, 7800.0, 0.3, 2e7)
            },
            Preset::Snow => MaterialParams::new(label, E::Sigma, P::Sigma, 400.0, 0.2, 1.4e5),
        }
    }
}
