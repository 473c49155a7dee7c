use super::svd::{polar_rotation, svd3};
use super::{lame_from, ConstitutiveError, Elasticity, LameParams};
use crate::Mat3;

fn check_det(f: &Mat3) -> Result<f64, ConstitutiveError> {
    let det = f.determinant();
    if det > 0.0 && det.is_finite() {
        Ok(det)
    } else {
        Err(ConstitutiveError::Inverted { det })
    }
}

/// Splits the stress of `model` at `f` into its shear and bulk parts, so that
/// `τ = μ·τ_μ + λ·τ_λ`.
pub fn elastic_basis(model: Elasticity, f: &Mat3) -> Result<(Mat3, Mat3), ConstitutiveError> {
    let j = check_det(f)?;
    let id = Mat3::identity();
    Ok(match model {
        Elasticity::Sigma => {
            let s = svd3(f);
            let eps = s.sigma.map(f64::ln);
            let shear = s.u * Mat3::from_diagonal(&(eps * 2.0)) * s.u.transpose();
            (shear, id * eps.sum())
        }
        Elasticity::Corotated => {
            let r = polar_rotation(&svd3(f));
            ((f - r) * f.transpose() * 2.0, id * (j * (j - 1.0)))
        }
        Elasticity::StVK => {
            let green = (f.transpose() * f - id) * 0.5;
            (f * green * f.transpose() * 2.0, id * (j * (j - 1.0)))
        }
        Elasticity::NeoHookean => (f * f.transpose() - id, id * j.ln()),
        Elasticity::Fluid => (Mat3::zeros(), id * (j * (j - 1.0))),
        Elasticity::Volume => {
            // κ = 2μ/3 + λ, pressure term J − J⁻¹.
            let p = j - 1.0 / j;
            (id * (2.0 / 3.0 * p), id * p)
        }
    })
}

/// Kirchhoff stress `τ = (∂Φ/∂F) Fᵀ`.
pub fn elastic_stress(model: Elasticity, f: &Mat3, lame: LameParams) -> Result<Mat3, ConstitutiveError> {
    let (shear, bulk) = elastic_basis(model, f)?;
    Ok(shear * lame.mu + bulk * lame.lambda)
}

/// Stress and `∂‖τ‖_F / ∂ log E` at fixed `F` and `ν`.
///
/// The derivative is propagated forward: `dμ/dlog E = μ`, `dλ/dlog E = λ`,
/// so `τ̇ = μ̇ τ_μ + λ̇ τ_λ` and `d‖τ‖ = ⟨τ, τ̇⟩ / ‖τ‖`. It is zero where τ = 0.
pub fn stress_and_sensitivity(
    model: Elasticity,
    f: &Mat3,
    young: f64,
    poisson: f64,
) -> Result<(Mat3, f64), ConstitutiveError> {
    let lame = lame_from(young, poisson)?;
    let (shear, bulk) = elastic_basis(model, f)?;
    let tau = shear * lame.mu + bulk * lame.lambda;
    let dmu = young * (1.0 / (2.0 * (1.0 + poisson)));
    let dlambda = young * (poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)));
    let dtau = shear * dmu + bulk * dlambda;
    let norm = tau.norm();
    let dnorm = if norm > 0.0 { tau.dot(&dtau) / norm } else { 0.0 };
    Ok((tau, dnorm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    fn lame(mu: f64, lambda: f64) -> LameParams {
        LameParams { mu, lambda }
    }

    #[test]
    fn rest_state_is_stress_free() {
        for m in Elasticity::ALL {
            let tau = elastic_stress(m, &Mat3::identity(), lame(3.0, 5.0)).unwrap();
            assert_eq!(tau.norm(), 0.0, "{m:?}");
        }
    }

    #[test]
    fn corotated_uniaxial_stretch() {
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let tau = elastic_stress(Elasticity::Corotated, &f, lame(1.0, 0.0)).unwrap();
        assert!((tau - Mat3::from_diagonal(&Vec3::new(4.0, 0.0, 0.0))).norm() < 1e-14);
    }

    #[test]
    fn fluid_pressure() {
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let tau = elastic_stress(Elasticity::Fluid, &f, lame(7.0, 1.0)).unwrap();
        assert_eq!(tau, Mat3::identity() * 2.0);
    }

    #[test]
    fn volume_vanishes_at_unit_jacobian() {
        // det = 1 but strongly sheared.
        let f = Mat3::new(1.0, 0.7, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let tau = elastic_stress(Elasticity::Volume, &f, lame(4.0, 9.0)).unwrap();
        assert!(tau.norm() < 1e-15);
    }

    #[test]
    fn sigma_matches_hencky_on_diagonal() {
        let s = Vec3::new(1.3, 0.9, 1.1);
        let (mu, la) = (2.0, 3.0);
        let tau = elastic_stress(Elasticity::Sigma, &Mat3::from_diagonal(&s), lame(mu, la)).unwrap();
        let eps = s.map(f64::ln);
        for i in 0..3 {
            assert!((tau[(i, i)] - (2.0 * mu * eps[i] + la * eps.sum())).abs() < 1e-14);
        }
    }

    #[test]
    fn inverted_and_singular_are_errors() {
        let f = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        for m in Elasticity::ALL {
            assert!(matches!(elastic_stress(m, &f, lame(1.0, 1.0)), Err(ConstitutiveError::Inverted { .. })));
            assert!(elastic_stress(m, &Mat3::zeros(), lame(1.0, 1.0)).is_err());
        }
    }

    #[test]
    fn sensitivity_at_rest_is_zero() {
        for m in Elasticity::ALL {
            let (tau, d) = stress_and_sensitivity(m, &Mat3::identity(), 1e5, 0.3).unwrap();
            assert_eq!((tau.norm(), d), (0.0, 0.0));
        }
    }

    #[test]
    fn sensitivity_equals_norm() {
        let f = Mat3::new(1.1, 0.2, 0.0, -0.1, 0.95, 0.05, 0.0, 0.1, 1.02);
        for m in Elasticity::ALL {
            let (tau, d) = stress_and_sensitivity(m, &f, 250.0, 0.3).unwrap();
            assert!((d - tau.norm()).abs() <= 1e-12 * tau.norm(), "{m:?}");
            let (tau2, d2) = stress_and_sensitivity(m, &f, 500.0, 0.3).unwrap();
            assert!((tau2.norm() - 2.0 * tau.norm()).abs() <= 1e-12 * tau2.norm());
            assert!((d2 - 2.0 * d).abs() <= 1e-12 * d2);
        }
    }
}
