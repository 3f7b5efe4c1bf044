use serde::{Deserialize, Serialize};

use super::operator::{spin_operators, HermitianOperator, Orientation, SpinOps, SpinQuantum};
use super::Vec3;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

fn finite3(v: &Vec3, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("non-finite {what}")))
    }
}

/// (D+δ)Sz² + γ_e B·S + A Sz for a single NV (3×3, MHz). `b` in Tesla.
pub fn build_nv_hamiltonian(
    delta: f64,
    b: &Vec3,
    a_bath: f64,
    k: &PhysicalConstants,
) -> Result<HermitianOperator> {
    finite3(b, "field")?;
    if !delta.is_finite() || !a_bath.is_finite() {
        return Err(Error::InvalidInput("non-finite NV parameters".into()));
    }
    let s = spin_operators(SpinQuantum::one());
    let sz2 = s.sz.anticommutator_half(&s.sz);
    HermitianOperator::combine(&[
        (k.d_gs + delta, &sz2),
        (k.gamma_e, &s.along(b)),
        (a_bath, &s.sz),
    ])
}

/// Symmetric strain tensor (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainTensor {
    pub eps: [[f64; 3]; 3],
}

impl StrainTensor {
    pub fn new(eps: [[f64; 3]; 3]) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                if !eps[i][j].is_finite() {
                    return Err(Error::InvalidInput("non-finite strain".into()));
                }
                if (eps[i][j] - eps[j][i]).abs() > 1e-15 * (1.0 + eps[i][j].abs()) {
                    return Err(Error::InvalidInput("strain tensor must be symmetric".into()));
                }
            }
        }
        Ok(Self { eps })
    }
    pub fn zero() -> Self {
        Self { eps: [[0.0; 3]; 3] }
    }
}

/// (M_x, M_y, M_z) in MHz.
pub fn strain_amplitudes(e: &StrainTensor, k: &PhysicalConstants) -> Vec3 {
    let s = &e.eps;
    let ghz = 1e3;
    Vec3::new(
        ghz * (k.b * (s[0][0] - s[1][1]) + 2.0 * k.c * s[1][2]),
        ghz * (-2.0 * k.b * s[0][1] - 2.0 * k.c * s[0][2]),
        ghz * (k.a1 * s[2][2] + k.a2 * (s[0][0] + s[1][1])),
    )
}

/// Strain and electric-field terms of the NV ground state. `e_field` in V/cm.
pub fn build_strain_ef_hamiltonian(
    strain: &StrainTensor,
    e_field: &Vec3,
    k: &PhysicalConstants,
) -> Result<HermitianOperator> {
    finite3(e_field, "electric field")?;
    let m = strain_amplitudes(strain, k);
    let hz_to_mhz = 1e-6;
    let pz = m.z + k.d_parallel * e_field.z * hz_to_mhz;
    let px = m.x + k.d_perpendicular * e_field.x * hz_to_mhz;
    let py = m.y + k.d_perpendicular * e_field.y * hz_to_mhz;
    let s = spin_operators(SpinQuantum::one());
    let sz2 = s.sz.anticommutator_half(&s.sz);
    let sx2 = s.sx.anticommutator_half(&s.sx);
    let sy2 = s.sy.anticommutator_half(&s.sy);
    let sxy = s.sx.anticommutator_half(&s.sy).scale(2.0);
    HermitianOperator::combine(&[(pz, &sz2), (px, &sy2), (-px, &sx2), (py, &sxy)])
}

/// Electron spin operators of a P1 center in the 6-dim space (electron ⊗ ¹⁴N).
pub fn p1_electron_ops() -> SpinOps {
    spin_operators(SpinQuantum::half()).embed(1, 3)
}

/// P1 Hamiltonian in its own frame; `b_lab` (Tesla) is rotated into that frame.
pub fn build_p1_hamiltonian(
    b_lab: &Vec3,
    orient: &Orientation,
    k: &PhysicalConstants,
) -> Result<HermitianOperator> {
    finite3(b_lab, "field")?;
    let b = orient.to_local(b_lab);
    let s = p1_electron_ops();
    let i = spin_operators(SpinQuantum::one()).embed(2, 1);
    let szi = s.sz.anticommutator_half(&i.sz);
    let sxiy = s.sx.anticommutator_half(&i.sy);
    let syix = s.sy.anticommutator_half(&i.sx);
    let iz2 = i.sz.anticommutator_half(&i.sz);
    let zeeman = s.along(&b).scale(k.gamma_e);
    let hf = HermitianOperator::combine(&[
        (k.a_parallel_p1, &szi),
        (k.a_perp_p1, &sxiy),
        (k.a_perp_p1, &syix),
        (k.q_p1, &iz2),
    ])?;
    zeeman.add(&hf)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_core::eigensystem;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nv_zero_field() {
        let k = PhysicalConstants::default();
        let h = build_nv_hamiltonian(0.0, &Vec3::zeros(), 0.0, &k).unwrap();
        let e = eigensystem(&h).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.values[1], 2870.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.values[2], 2870.0, epsilon = 1e-9);
    }

    #[test]
    fn nv_axial_field_splitting() {
        let k = PhysicalConstants::default();
        let b = Vec3::new(0.0, 0.0, 1e-3);
        let e = eigensystem(&build_nv_hamiltonian(0.0, &b, 0.0, &k).unwrap()).unwrap();
        assert_abs_diff_eq!(e.values[2] - e.values[1], 2.0 * k.gamma_e * 1e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(e.values[1], 2870.0 - k.gamma_e * 1e-3, epsilon = 1e-9);
        let e2 = eigensystem(&build_nv_hamiltonian(0.05, &b, 0.0, &k).unwrap()).unwrap();
        assert_abs_diff_eq!(e2.values[1] - e.values[1], 0.05, epsilon = 1e-9);
        assert_abs_diff_eq!(e2.values[2] - e.values[2], 0.05, epsilon = 1e-9);
    }

    #[test]
    fn nv_commutes_with_sz_when_axial() {
        let k = PhysicalConstants::default();
        let h = build_nv_hamiltonian(0.0, &Vec3::new(0.0, 0.0, 3e-3), 0.0, &k).unwrap();
        let sz = spin_operators(SpinQuantum::one()).sz;
        let c = h.matrix() * sz.matrix() - sz.matrix() * h.matrix();
        assert!(c.camax() < 1e-9);
    }

    #[test]
    fn strain_examples() {
        let k = PhysicalConstants::default();
        let h = build_strain_ef_hamiltonian(&StrainTensor::zero(), &Vec3::new(0.0, 0.0, 1.0), &k).unwrap();
        // Sz² coefficient is read off the |+1⟩ diagonal; 0.35 Hz = 0.35e-6 MHz.
        assert_abs_diff_eq!(h.matrix()[(0, 0)].re, 0.35e-6, epsilon = 1e-18);
        let mut eps = [[0.0; 3]; 3];
        eps[2][2] = 1e-6;
        let m = strain_amplitudes(&StrainTensor::new(eps).unwrap(), &k);
        assert_abs_diff_eq!(m.z, -8e-3, epsilon = 1e-15);
        assert_eq!((m.x, m.y), (0.0, 0.0));
        let z = build_strain_ef_hamiltonian(&StrainTensor::zero(), &Vec3::zeros(), &k).unwrap();
        assert_eq!(z.matrix().camax(), 0.0);
    }

    #[test]
    fn p1_hermitian_and_orientation_invariant_at_zero_field() {
        let k = PhysicalConstants::default();
        let base = eigensystem(&build_p1_hamiltonian(&Vec3::zeros(), &Orientation::on_axis(), &k).unwrap())
            .unwrap()
            .values;
        for o in Orientation::nv_axes() {
            let v = eigensystem(&build_p1_hamiltonian(&Vec3::zeros(), &o, &k).unwrap()).unwrap().values;
            for (a, b) in base.iter().zip(&v) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }
}
