use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::PPM_PER_NM3;
use crate::error::{Error, Result};

/// γ_e in Hz/T.
const GAMMA_E_HZ_PER_T: f64 = 28.02495e9;

/// NV centers in `volume` mm³ at `ppm`.
pub fn nv_count(ppm: f64, volume_mm3: f64) -> f64 {
    // nm⁻³ → mm⁻³ is 1e18.
    ppm * PPM_PER_NM3 * 1e18 * volume_mm3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyParams {
    pub gamma2star_khz: f64,
    pub stretch: f64,
    pub n_nv_ppm: f64,
    pub volume_mm3: f64,
    pub contrast: f64,
    /// Detected photons per second per NV while reading out.
    pub photon_rate: f64,
    pub readout_us: f64,
    /// Initialization and readout dead time per shot.
    pub overhead_us: f64,
}

impl Default for RamseyParams {
    fn default() -> Self {
        Self {
            gamma2star_khz: 100.0,
            stretch: 1.0,
            n_nv_ppm: 0.1,
            volume_mm3: 0.04,
            contrast: 0.02,
            photon_rate: 3e4,
            readout_us: 1.0,
            overhead_us: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    /// pT/√Hz
    pub eta_pt: f64,
    /// Optimal interrogation time, µs (Ramsey) or 0 (CW).
    pub tau_us: f64,
    pub n_nv: f64,
}

impl RamseyParams {
    fn validate(&self) -> Result<()> {
        let all = [self.gamma2star_khz, self.stretch, self.n_nv_ppm, self.volume_mm3, self.contrast, self.photon_rate, self.readout_us];
        if all.iter().any(|v| !(*v > 0.0)) || !(self.overhead_us >= 0.0) {
            return Err(Error::InvalidInput("Ramsey inputs must be positive".into()));
        }
        Ok(())
    }

    /// η(τ) in T/√Hz.
    pub fn eta_at(&self, tau_us: f64) -> f64 {
        let t2 = 1e3 / self.gamma2star_khz;
        let n = nv_count(self.n_nv_ppm, self.volume_mm3);
        let photons = self.photon_rate * self.readout_us * 1e-6;
        let tau = tau_us * 1e-6;
        ((tau_us / t2).powf(self.stretch)).exp() * (tau + self.overhead_us * 1e-6).sqrt()
            / (2.0 * PI * GAMMA_E_HZ_PER_T * self.contrast * (n * photons).sqrt() * tau)
    }
}

/// Golden-section minimum of a unimodal function on [a, b].
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Shot-noise-limited Ramsey sensitivity minimized over the free-evolution time.
pub fn sensitivity_ramsey(p: &RamseyParams) -> Result<Sensitivity> {
    p.validate()?;
    let t2 = 1e3 / p.gamma2star_khz;
    // log τ keeps the search scale free.
    let x = golden_min(|x| p.eta_at(x.exp()).ln(), (1e-4 * t2).ln(), (20.0 * t2).ln());
    let tau = x.exp();
    Ok(Sensitivity { eta_pt: p.eta_at(tau) * 1e12, tau_us: tau, n_nv: nv_count(p.n_nv_ppm, p.volume_mm3) })
}

/// Five-level photophysics: ground 0, ground ±1, excited 0, excited ±1, singlet. Rates in MHz (1/µs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiveLevelRates {
    pub radiative: f64,
    pub isc_from_pm1: f64,
    pub isc_from_0: f64,
    pub singlet_decay: f64,
    /// Fraction of singlet decay into ground 0.
    pub singlet_to_0: f64,
}

impl Default for FiveLevelRates {
    fn default() -> Self {
        Self { radiative: 65.0, isc_from_pm1: 80.0, isc_from_0: 11.0, singlet_decay: 3.0, singlet_to_0: 0.5 }
    }
}

/// Steady-state populations [g0, g±1, e0, e±1, s] for an optical pump rate and a MW transfer rate.
pub fn five_level_steady_state(r: &FiveLevelRates, pump: f64, mw: f64) -> Result<[f64; 5]> {
    let vals = [r.radiative, r.isc_from_pm1, r.isc_from_0, r.singlet_decay];
    if vals.iter().any(|v| !(*v > 0.0)) || !(0.0..=1.0).contains(&r.singlet_to_0) || !(pump >= 0.0) || !(mw >= 0.0) {
        return Err(Error::InvalidInput("five-level rates must be positive".into()));
    }
    // k[(to, from)]
    let mut k = SMatrix::<f64, 5, 5>::zeros();
    k[(2, 0)] = pump;
    k[(3, 1)] = pump;
    k[(0, 2)] = r.radiative;
    k[(1, 3)] = r.radiative;
    k[(4, 2)] = r.isc_from_0;
    k[(4, 3)] = r.isc_from_pm1;
    k[(0, 4)] = r.singlet_decay * r.singlet_to_0;
    k[(1, 4)] = r.singlet_decay * (1.0 - r.singlet_to_0);
    k[(1, 0)] += mw;
    k[(0, 1)] += mw;
    let mut m = k;
    for j in 0..5 {
        let out: f64 = (0..5).map(|i| k[(i, j)]).sum();
        m[(j, j)] -= out;
    }
    // Replace one balance equation by normalization.
    for j in 0..5 {
        m[(4, j)] = 1.0;
    }
    let mut rhs = SVector::<f64, 5>::zeros();
    rhs[4] = 1.0;
    let lu = m.lu();
    if lu.determinant().abs() < 1e-14 {
        return Err(Error::Singular("rate matrix is reducible at these rates".into()));
    }
    let p = lu.solve(&rhs).ok_or_else(|| Error::Singular("rate matrix".into()))?;
    Ok([p[0], p[1], p[2], p[3], p[4]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CwParams {
    pub gamma2star_khz: f64,
    pub n_nv_ppm: f64,
    pub volume_mm3: f64,
    /// Photons per second per NV at saturating pump (pump = radiative rate), MW off.
    pub photon_rate: f64,
    pub rates: FiveLevelRates,
}

impl Default for CwParams {
    fn default() -> Self {
        Self { gamma2star_khz: 100.0, n_nv_ppm: 0.1, volume_mm3: 0.04, photon_rate: 3e4, rates: FiveLevelRates::default() }
    }
}

/// Lorentzian lineshape factor 4/(3√3).
pub const LORENTZ_FACTOR: f64 = 0.769_800_358_919_501;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwPoint {
    pub pump_mhz: f64,
    pub rabi_mhz: f64,
    pub contrast: f64,
    /// FWHM, Hz
    pub linewidth_hz: f64,
    /// Detected photons per second, whole ensemble.
    pub photon_rate: f64,
    /// T/√Hz, infinite when there is no contrast.
    pub eta: f64,
}

fn fluorescence(p: &CwParams, pump: f64, rabi: f64, detuning: f64) -> Result<f64> {
    // Ground-state coherence decays with T₂* and with optical pumping.
    let g2 = p.gamma2star_khz * 1e-3 + pump;
    let omega = 2.0 * PI * rabi;
    let d = 2.0 * PI * detuning;
    let w = 0.5 * omega * omega * g2 / (g2 * g2 + d * d);
    let s = five_level_steady_state(&p.rates, pump, w)?;
    Ok(p.rates.radiative * (s[2] + s[3]))
}

/// Contrast, linewidth and η from a detuning sweep at one pump and Rabi rate.
pub fn cw_point(p: &CwParams, pump: f64, rabi: f64) -> Result<CwPoint> {
    let n = nv_count(p.n_nv_ppm, p.volume_mm3);
    let sat = fluorescence(p, p.rates.radiative, 0.0, 0.0)?;
    let off = fluorescence(p, pump, 0.0, 0.0)?;
    let on = fluorescence(p, pump, rabi, 0.0)?;
    let photon_rate = n * p.photon_rate * off / sat;
    let contrast = if off > 0.0 { 1.0 - on / off } else { 0.0 };
    if !(contrast > 1e-12) {
        return Ok(CwPoint { pump_mhz: pump, rabi_mhz: rabi, contrast: 0.0, linewidth_hz: 0.0, photon_rate, eta: f64::INFINITY });
    }
    // Half-depth detuning by bisection; the dip is symmetric and monotone in |Δ|.
    let half = 1.0 - 0.5 * contrast;
    let depth = |d: f64| fluorescence(p, pump, rabi, d).map(|f| f / off);
    let mut hi = (p.gamma2star_khz * 1e-3 + pump + rabi) / (2.0 * PI) + 1e-9;
    while depth(hi)? < half {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if depth(mid)? < half {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let linewidth_hz = 2.0 * 0.5 * (lo + hi) * 1e6;
    let eta = LORENTZ_FACTOR * linewidth_hz / (GAMMA_E_HZ_PER_T * contrast * photon_rate.sqrt());
    Ok(CwPoint { pump_mhz: pump, rabi_mhz: rabi, contrast, linewidth_hz, photon_rate, eta })
}

/// CW-ODMR sensitivity minimized over pump and Rabi rates on log grids.
pub fn sensitivity_cwodmr(p: &CwParams) -> Result<(Sensitivity, CwPoint)> {
    if [p.gamma2star_khz, p.n_nv_ppm, p.volume_mm3, p.photon_rate].iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("CW inputs must be positive".into()));
    }
    let grid = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
        (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
    };
    let mut best: Option<CwPoint> = None;
    for pump in grid(1e-4, 50.0, 29) {
        for rabi in grid(1e-4, 10.0, 26) {
            let c = cw_point(p, pump, rabi)?;
            if best.map_or(true, |b| c.eta < b.eta) {
                best = Some(c);
            }
        }
    }
    let b = best.expect("grid non-empty");
    Ok((Sensitivity { eta_pt: b.eta * 1e12, tau_us: 0.0, n_nv: nv_count(p.n_nv_ppm, p.volume_mm3) }, b))
}
