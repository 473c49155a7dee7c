use super::svd::svd3;
use super::{ConstitutiveError, LameParams, MaterialParams, Plasticity};
use crate::{Mat3, Vec3};

/// Bounds for the volume ratio under `Plasticity::Sigma`.
pub const SIGMA_J_MIN: f64 = 0.05;
pub const SIGMA_J_MAX: f64 = 1.2;

/// `α = √(2/3) · 2 sin φ / (3 − sin φ)` with φ in degrees.
pub fn drucker_prager_alpha(friction_angle_deg: f64) -> f64 {
    let s = friction_angle_deg.to_radians().sin();
    (2.0f64 / 3.0).sqrt() * 2.0 * s / (3.0 - s)
}

/// Radius of the von Mises cylinder in log-strain space, `σ_y / (2μ)`.
pub fn von_mises_yield_strain(yield_stress: f64, mu: f64) -> f64 {
    yield_stress / (2.0 * mu)
}

fn positive_det(f: &Mat3) -> Result<f64, ConstitutiveError> {
    let det = f.determinant();
    if det > 0.0 && det.is_finite() {
        Ok(det)
    } else {
        Err(ConstitutiveError::Inverted { det })
    }
}

/// Projects `f` back onto the admissible set of `model`.
pub fn plastic_return(
    model: Plasticity,
    f: &Mat3,
    lame: LameParams,
    params: &MaterialParams,
) -> Result<Mat3, ConstitutiveError> {
    match model {
        Plasticity::Identity => Ok(*f),
        Plasticity::Fluid => {
            let j = positive_det(f)?;
            Ok(Mat3::identity() * j.cbrt())
        }
        Plasticity::Sigma => {
            let j = positive_det(f)?.clamp(SIGMA_J_MIN, SIGMA_J_MAX);
            Ok(Mat3::identity() * j.cbrt())
        }
        Plasticity::VonMises => {
            positive_det(f)?;
            let s = svd3(f);
            let eps = s.sigma.map(f64::ln);
            let dev = eps - Vec3::repeat(eps.sum() / 3.0);
            let dev_norm = dev.norm();
            let dgamma = dev_norm - von_mises_yield_strain(params.yield_stress, lame.mu);
            if dgamma <= 0.0 {
                return Ok(*f);
            }
            let eps = eps - dev * (dgamma / dev_norm);
            Ok(s.u * Mat3::from_diagonal(&eps.map(f64::exp)) * s.v.transpose())
        }
        Plasticity::DruckerPrager => {
            positive_det(f)?;
            let s = svd3(f);
            let eps = s.sigma.map(f64::ln);
            let tr = eps.sum();
            let (mu, lambda) = (lame.mu, lame.lambda);
            let alpha = drucker_prager_alpha(params.friction_angle);
            let bulk = alpha * (3.0 * lambda + 2.0 * mu);
            // Beyond the cone apex: project to the apex. With zero cohesion
            // the apex is ε = 0, i.e. Σ = I.
            if bulk > 0.0 && tr * bulk > params.cohesion {
                let apex = Vec3::repeat(params.cohesion / bulk / 3.0);
                return Ok(s.u * Mat3::from_diagonal(&apex.map(f64::exp)) * s.v.transpose());
            }
            let dev = eps - Vec3::repeat(tr / 3.0);
            let dev_norm = dev.norm();
            let dgamma = dev_norm + bulk / (2.0 * mu) * tr - params.cohesion / (2.0 * mu);
            if dgamma <= 0.0 || dev_norm == 0.0 {
                return Ok(*f);
            }
            let eps = eps - dev * (dgamma / dev_norm);
            Ok(s.u * Mat3::from_diagonal(&eps.map(f64::exp)) * s.v.transpose())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{lame_from, Elasticity};

    fn material(plasticity: Plasticity) -> MaterialParams {
        MaterialParams {
            yield_stress: 50.0,
            friction_angle: 30.0,
            ..MaterialParams::new(0, Elasticity::Sigma, plasticity, 1.0, 0.3, 1e4)
        }
    }

    fn run(model: Plasticity, f: &Mat3) -> Mat3 {
        let m = material(model);
        plastic_return(model, f, m.lame().unwrap(), &m).unwrap()
    }

    #[test]
    fn identity_leaves_f() {
        let f = Mat3::new(1.2, 0.3, 0.0, 0.1, 0.9, 0.0, 0.0, 0.2, 1.1);
        assert_eq!(run(Plasticity::Identity, &f), f);
    }

    #[test]
    fn rest_state_is_fixed_point() {
        for p in [
            Plasticity::Identity,
            Plasticity::Sigma,
            Plasticity::VonMises,
            Plasticity::DruckerPrager,
            Plasticity::Fluid,
        ] {
            assert!((run(p, &Mat3::identity()) - Mat3::identity()).norm() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn fluid_keeps_volume_only() {
        let f = Mat3::from_diagonal(&Vec3::new(8.0, 1.0, 1.0));
        assert!((run(Plasticity::Fluid, &f) - Mat3::identity() * 2.0).norm() < 1e-15);
    }

    #[test]
    fn sigma_clamps_expansion() {
        let f = Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 1.0));
        let out = run(Plasticity::Sigma, &f);
        assert!((out - Mat3::identity() * 1.2f64.cbrt()).norm() < 1e-15);
        assert!((out[(0, 0)] - 1.06266).abs() < 1e-5);
    }

    #[test]
    fn drucker_prager_tension_goes_to_apex() {
        let f = Mat3::new(1.5, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 1.5);
        assert!((run(Plasticity::DruckerPrager, &f) - Mat3::identity()).norm() < 1e-14);
        let rotated = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 0.9).into_inner()
            * Mat3::from_diagonal(&Vec3::new(1.3, 1.1, 1.05));
        let s = svd3(&rotated);
        assert!((run(Plasticity::DruckerPrager, &rotated) - s.u * s.v.transpose()).norm() < 1e-12);
    }

    #[test]
    fn von_mises_elastic_region_untouched() {
        let lame = lame_from(1e4, 0.3).unwrap();
        let r = von_mises_yield_strain(50.0, lame.mu);
        // Deviatoric log strain well inside the cylinder.
        let d = 0.5 * r / (2.0f64 / 3.0).sqrt();
        let f = Mat3::from_diagonal(&Vec3::new((d).exp(), (-d / 2.0).exp(), (-d / 2.0).exp()));
        assert_eq!(run(Plasticity::VonMises, &f), f);
    }

    #[test]
    fn alpha_reference_value() {
        // φ = 30°: sin = 1/2, α = √(2/3)·1/2.5.
        assert!((drucker_prager_alpha(30.0) - (2.0f64 / 3.0).sqrt() * 0.4).abs() < 1e-15);
        assert_eq!(drucker_prager_alpha(0.0), 0.0);
    }
}
