use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate-per-density and scaling factors used to turn measured rates into budget terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversionFactors {
    /// Aligned spin-1/2 electron bath, Ramsey, kHz/ppm.
    pub electron_bath: f64,
    /// ¹³C Ramsey, kHz per ppm of ¹³C.
    pub c13: f64,
    /// Electron-bath value scaled by γ_C/γ_e, kHz per ppm, reported alongside.
    pub c13_scaled: f64,
    /// P1 duration-sweep DEER with finite pulses, kHz/ppm.
    pub p1_deer: f64,
    /// Γ_P1 / Γ_P1,DEER at 9.5 G.
    pub p1_total_over_deer: f64,
    /// Off-axis NV DEER, kHz/ppm.
    pub nv_off_deer: f64,
    /// Hahn-echo contribution of P1, kHz/ppm.
    pub gamma2_p1: f64,
    /// Hahn-echo contribution of NV-NV, kHz/ppm.
    pub gamma2_nv: f64,
    /// XY8 asymptote per ppm NV.
    pub nvnv: f64,
    /// Zero-field dip width per ppm^(2/3) of charges, MHz.
    pub charge_zf: f64,
    /// Dip width per ppm^(2/3) of NV, kHz.
    pub elec_vs_nv: f64,
    pub t1_ms: f64,
    pub d_parallel: f64,
    pub d_perpendicular: f64,
    /// Half-width of the consistency band.
    pub consistency_band: f64,
}

impl Default for ConversionFactors {
    fn default() -> Self {
        Self {
            electron_bath: 141.0,
            c13: 0.1,
            c13_scaled: 0.054,
            p1_deer: 13.0,
            p1_total_over_deer: 6.0,
            nv_off_deer: 10.1,
            gamma2_p1: 6.3,
            gamma2_nv: 20.6,
            nvnv: 17.6,
            charge_zf: 0.56,
            elec_vs_nv: 560.0,
            t1_ms: 6.0,
            d_parallel: 0.35,
            d_perpendicular: 17.0,
            consistency_band: 0.2,
        }
    }
}

impl ConversionFactors {
    /// The NV-NV factor from the cited review instead of the 3 kHz ↔ 0.17 ppm pairing.
    pub fn with_review_nvnv(mut self) -> Self {
        self.nvnv = self.gamma2_nv;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v, _) in self.table() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("conversion factor {name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn gamma1_khz(&self) -> f64 {
        1.0 / self.t1_ms
    }

    /// (name, value, measurement context) for every factor.
    pub fn table(&self) -> Vec<(&'static str, f64, &'static str)> {
        vec![
            ("electron_bath", self.electron_bath, "kHz/ppm, Ramsey, aligned spin-1/2 bath"),
            ("c13", self.c13, "kHz per ppm 13C, Ramsey"),
            ("c13_scaled", self.c13_scaled, "kHz per ppm 13C, electron bath scaled by gyromagnetic ratio"),
            ("p1_deer", self.p1_deer, "kHz/ppm, duration-sweep DEER, 152 MHz line at 9.5 G, finite pulses"),
            ("p1_total_over_deer", self.p1_total_over_deer, "Ramsey P1 total over DEER, 9.5 G"),
            ("nv_off_deer", self.nv_off_deer, "kHz/ppm, off-axis NV DEER, one hyperfine line"),
            ("gamma2_p1", self.gamma2_p1, "kHz/ppm, Hahn echo, P1"),
            ("gamma2_nv", self.gamma2_nv, "kHz/ppm, Hahn echo, NV-NV (review value)"),
            ("nvnv", self.nvnv, "kHz/ppm, XY8-N asymptote, NV-NV"),
            ("charge_zf", self.charge_zf, "MHz per ppm^(2/3), zero-field dip width from charges"),
            ("elec_vs_nv", self.elec_vs_nv, "kHz per ppm^(2/3), dip width versus NV density"),
            ("t1_ms", self.t1_ms, "ms, longitudinal relaxation"),
            ("d_parallel", self.d_parallel, "Hz cm/V"),
            ("d_perpendicular", self.d_perpendicular, "Hz cm/V"),
            ("consistency_band", self.consistency_band, "allowed |ratio - 1|"),
        ]
    }
}
