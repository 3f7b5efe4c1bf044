use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One Gauss in Tesla.
pub const GAUSS: f64 = 1e-4;
/// Number density of 1 ppm of carbon sites, in nm⁻³ (1.76e17 cm⁻³).
pub const PPM_PER_NM3: f64 = 1.76e-4;
/// CODATA μ₀h/4π expressed in MHz·nm³ per (MHz/T)².
pub const MU0_H_OVER_4PI: f64 = 6.626_070_15e-8;

/// Physical constants used throughout. Energies are frequencies (h = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalConstants {
    /// Ground-state zero-field splitting, MHz.
    pub d_gs: f64,
    /// Electron gyromagnetic ratio, MHz/T.
    pub gamma_e: f64,
    pub gamma_c13: f64,
    pub gamma_n14: f64,
    /// Dipolar prefactor J·r³/(γ₁γ₂) in MHz·nm³/(MHz/T)².
    pub mu0_hbar_prefactor: f64,
    /// Electric dipole moments, Hz·cm/V.
    pub d_parallel: f64,
    pub d_perpendicular: f64,
    /// Spin-strain couplings, GHz/strain.
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
    /// P1 hyperfine and quadrupole, MHz.
    pub a_parallel_p1: f64,
    pub a_perp_p1: f64,
    pub q_p1: f64,
    /// NV ¹⁴N hyperfine and quadrupole, MHz.
    pub a_hf_nv14n: f64,
    pub q_nv14n: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            d_gs: 2870.0,
            gamma_e: 28024.95,
            gamma_c13: 10.7,
            gamma_n14: 3.077,
            // Scaled from CODATA so the aligned spin-1/2 bath gives 141 kHz/ppm.
            mu0_hbar_prefactor: 6.410_328_5e-8,
            d_parallel: 0.35,
            d_perpendicular: 17.0,
            a1: -8.0,
            a2: -12.4,
            b: -3.7,
            c: 11.8,
            a_parallel_p1: 114.2,
            a_perp_p1: 81.8,
            q_p1: 3.97,
            a_hf_nv14n: 2.16,
            q_nv14n: -4.945,
        }
    }
}

impl PhysicalConstants {
    /// Same set with the unscaled CODATA dipolar prefactor.
    pub fn codata() -> Self {
        Self { mu0_hbar_prefactor: MU0_H_OVER_4PI, ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("constants: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.d_gs, self.gamma_e, self.gamma_c13, self.gamma_n14, self.mu0_hbar_prefactor,
            self.d_parallel, self.d_perpendicular, self.a1, self.a2, self.b, self.c,
            self.a_parallel_p1, self.a_perp_p1, self.q_p1, self.a_hf_nv14n, self.q_nv14n,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite constant".into()));
        }
        if self.mu0_hbar_prefactor <= 0.0 || self.d_perpendicular <= 0.0 {
            return Err(Error::InvalidInput("prefactors must be positive".into()));
        }
        Ok(())
    }

    /// Dipolar coupling at 1 nm for two species, MHz·nm³.
    pub fn dipolar_j(&self, gamma1: f64, gamma2: f64) -> f64 {
        self.mu0_hbar_prefactor * gamma1 * gamma2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_overrides_and_rejects_unknown() {
        let c = PhysicalConstants::from_json(r#"{"gamma_e": 28000.0}"#).unwrap();
        assert_eq!(c.gamma_e, 28000.0);
        assert_eq!(c.d_gs, 2870.0);
        assert!(PhysicalConstants::from_json(r#"{"gamma_x": 1.0}"#).is_err());
    }

    #[test]
    fn codata_coupling_at_one_nm() {
        let c = PhysicalConstants::codata();
        let j = c.dipolar_j(c.gamma_e, c.gamma_e);
        assert!((j - 52.041).abs() < 1e-2);
    }
}
