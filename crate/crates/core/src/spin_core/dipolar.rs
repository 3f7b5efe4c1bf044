use nalgebra::Matrix3;

use super::Vec3;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Dipolar tensor T with H = S₁·T·S₂ (MHz) for separation `r` in nm.
pub fn dipolar_coupling_tensor(
    r: &Vec3,
    gamma1: f64,
    gamma2: f64,
    k: &PhysicalConstants,
) -> Result<Matrix3<f64>> {
    let d = r.norm();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidInput("separation must be non-zero and finite".into()));
    }
    let u = r / d;
    let j = k.dipolar_j(gamma1, gamma2) / (d * d * d);
    Ok((Matrix3::identity() - u * u.transpose() * 3.0) * j)
}

/// The S₁ᶻS₂ᶻ coefficient kept in the secular approximation.
pub fn secular_zz(t: &Matrix3<f64>) -> f64 {
    t[(2, 2)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn axial_and_magic_angle() {
        let k = PhysicalConstants::default();
        let g = k.gamma_e;
        let t = dipolar_coupling_tensor(&Vec3::new(0.0, 0.0, 2.0), g, g, &k).unwrap();
        assert_relative_eq!(secular_zz(&t), -2.0 * k.dipolar_j(g, g) / 8.0, max_relative = 1e-14);
        let th = (1.0f64 / 3.0).sqrt().acos();
        let t = dipolar_coupling_tensor(&Vec3::new(th.sin(), 0.0, th.cos()), g, g, &k).unwrap();
        assert!(secular_zz(&t).abs() < 1e-12 * k.dipolar_j(g, g));
    }

    #[test]
    fn inverse_cube_and_traceless() {
        let k = PhysicalConstants::default();
        let r = Vec3::new(1.0, -2.0, 0.5);
        let a = dipolar_coupling_tensor(&r, 10.0, 20.0, &k).unwrap();
        let b = dipolar_coupling_tensor(&(r * 2.0), 10.0, 20.0, &k).unwrap();
        assert!((a / 8.0 - b).amax() < 1e-15 * a.amax());
        assert!(a.trace().abs() < 1e-12 * a.amax());
        assert!(dipolar_coupling_tensor(&Vec3::zeros(), 1.0, 1.0, &k).is_err());
    }
}
