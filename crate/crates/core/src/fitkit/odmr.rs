use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, numeric_jacobian};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Proportionality between Rabi frequency and its contribution to the Lorentzian FWHM.
pub const POWER_BROADENING_COEFF: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    /// MHz
    pub freq: Vec<f64>,
    pub contrast: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl OdmrSpectrum {
    pub fn new(freq: Vec<f64>, contrast: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let s = Self { freq, contrast, sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.freq.len();
        if n == 0 || self.contrast.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidInput("spectrum columns empty or of unequal length".into()));
        }
        if self.freq.iter().chain(&self.contrast).chain(&self.sigma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectrum value".into()));
        }
        if self.freq.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("freq must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSynthParams {
    /// Electric-field spread, V/cm.
    pub sigma_e: f64,
    /// Gaussian spread of the strain components (Mx, My, Mz), MHz.
    pub strain_sigma: [f64; 3],
    pub rabi: f64,
    /// Intrinsic Lorentzian FWHM, MHz.
    pub intrinsic_width: f64,
    /// Total dip depth summed over the three hyperfine lines.
    pub contrast: f64,
    pub samples: usize,
    pub seed: u64,
    pub f_min: f64,
    pub f_max: f64,
    pub n_freq: usize,
}

impl Default for OdmrSynthParams {
    fn default() -> Self {
        Self {
            sigma_e: 0.0,
            strain_sigma: [0.0; 3],
            rabi: 0.05,
            intrinsic_width: 0.05,
            contrast: 0.03,
            samples: 20_000,
            seed: 7,
            f_min: 2866.0,
            f_max: 2874.0,
            n_freq: 401,
        }
    }
}

/// Peak-normalized Lorentzian with full width `w`.
fn lorentz(df: f64, w: f64) -> f64 {
    let h = 0.5 * w;
    h * h / (df * df + h * h)
}

pub fn power_broadened_width(intrinsic: f64, rabi: f64) -> f64 {
    (intrinsic * intrinsic + (POWER_BROADENING_COEFF * rabi).powi(2)).sqrt()
}

/// Monte Carlo zero-field spectrum: the mI = 0 line from sampled fields, mI = ±1 as plain Lorentzians.
pub fn synth_zero_field_odmr(p: &OdmrSynthParams, k: &PhysicalConstants) -> Result<OdmrSpectrum> {
    if p.sigma_e < 0.0 || p.strain_sigma.iter().any(|s| *s < 0.0) {
        return Err(Error::InvalidInput("negative spread".into()));
    }
    if p.n_freq < 2 || !(p.f_max > p.f_min) || p.samples == 0 {
        return Err(Error::InvalidInput("bad frequency grid or sample count".into()));
    }
    let w = power_broadened_width(p.intrinsic_width, p.rabi);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    // d in Hz/(V/cm) → MHz per V/cm.
    let dpar = k.d_parallel * 1e-6;
    let dperp = k.d_perpendicular * 1e-6;
    let mut lines = Vec::with_capacity(2 * p.samples);
    for _ in 0..p.samples {
        let e: [f64; 3] = std::array::from_fn(|_| p.sigma_e * unit.sample(&mut rng));
        let m: [f64; 3] = std::array::from_fn(|i| p.strain_sigma[i] * unit.sample(&mut rng));
        let center = k.d_gs + dpar * e[2] + m[2];
        let split = ((dperp * e[0] + m[0]).powi(2) + (dperp * e[1] + m[1]).powi(2)).sqrt();
        lines.push(center + split);
        lines.push(center - split);
    }
    let a = k.a_hf_nv14n;
    let inv = 1.0 / lines.len() as f64;
    let freq: Vec<f64> = (0..p.n_freq)
        .map(|i| p.f_min + (p.f_max - p.f_min) * i as f64 / (p.n_freq - 1) as f64)
        .collect();
    let contrast = freq
        .iter()
        .map(|&f| {
            let g0: f64 = lines.iter().map(|&l| lorentz(f - l, w)).sum::<f64>() * inv;
            let side = lorentz(f - k.d_gs - a, w) + lorentz(f - k.d_gs + a, w);
            1.0 - p.contrast / 3.0 * (g0 + side)
        })
        .collect();
    OdmrSpectrum::new(freq.clone(), contrast, vec![0.0; freq.len()])
}

const RAYLEIGH_NODES: usize = 240;
const RAYLEIGH_CUTOFF: f64 = 6.0;

/// mI = 0 lineshape: Rayleigh-distributed splitting of scale `nu` convolved with a Lorentzian.
pub fn dip_lineshape(df: f64, nu: f64, w: f64) -> f64 {
    if nu <= 1e-6 * w {
        return lorentz(df, w);
    }
    let h = RAYLEIGH_CUTOFF / RAYLEIGH_NODES as f64;
    let mut s = 0.0;
    for i in 0..=RAYLEIGH_NODES {
        let u = i as f64 * h;
        let wt = if i == 0 || i == RAYLEIGH_NODES { 0.5 } else { 1.0 };
        s += wt * u * (-0.5 * u * u).exp() * 0.5 * (lorentz(df - nu * u, w) + lorentz(df + nu * u, w));
    }
    s * h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrFit {
    pub nu_dip_khz: f64,
    pub nu_dip_err_khz: f64,
    /// V/cm
    pub sigma_e: f64,
    pub gamma_elec_khz: f64,
    pub power_width_khz: f64,
    pub center_mhz: f64,
    pub residual_norm: f64,
    pub converged: bool,
}

// Parameters: f0, ν, w, C0, C1, baseline (MHz except the dimensionless depths).
fn odmr_model(p: &[f64], f: &[f64], a: f64) -> Vec<f64> {
    f.iter()
        .map(|&x| {
            let d = x - p[0];
            p[5] - p[3] * dip_lineshape(d, p[1], p[2]) - p[4] * (lorentz(d - a, p[2]) + lorentz(d + a, p[2]))
        })
        .collect()
}

/// Fits the dip width ν and derives σ_E = ν/d⊥ and Γ_elec = ν·d∥/d⊥.
pub fn fit_zero_field_odmr(s: &OdmrSpectrum, k: &PhysicalConstants) -> Result<OdmrFit> {
    s.validate()?;
    if s.len() < 8 {
        return Err(Error::InsufficientData("spectrum needs at least 8 points".into()));
    }
    if !(s.freq[0] < k.d_gs && s.freq[s.len() - 1] > k.d_gs) {
        return Err(Error::InvalidInput("spectrum does not cover the mI = 0 line".into()));
    }
    let base = s.contrast.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = s.contrast.iter().cloned().fold(f64::INFINITY, f64::min);
    let noise = {
        let mut v = s.sigma.clone();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let flat = OdmrFit {
        nu_dip_khz: 0.0,
        nu_dip_err_khz: 0.0,
        sigma_e: 0.0,
        gamma_elec_khz: 0.0,
        power_width_khz: 0.0,
        center_mhz: k.d_gs,
        residual_norm: 0.0,
        converged: true,
    };
    if base - lo <= 1e-9 + 3.0 * noise {
        return Ok(flat);
    }
    let a = k.a_hf_nv14n;
    let wts: Vec<f64> = if s.sigma.iter().all(|x| *x > 0.0) { s.sigma.iter().map(|x| 1.0 / x).collect() } else { vec![1.0; s.len()] };
    let near = |f0: f64| {
        s.freq
            .iter()
            .zip(&s.contrast)
            .min_by(|x, y| (x.0 - f0).abs().total_cmp(&(y.0 - f0).abs()))
            .map(|(_, c)| *c)
            .unwrap()
    };
    let c0 = (base - near(k.d_gs)).max(1e-6);
    let c1 = (base - 0.5 * (near(k.d_gs + a) + near(k.d_gs - a))).max(0.0);
    let resid = |p: &[f64]| -> Vec<f64> {
        odmr_model(p, &s.freq, a).iter().zip(&s.contrast).zip(&wts).map(|((m, y), w)| (m - y) * w).collect()
    };
    let model = |p: &[f64]| -> (Vec<f64>, DMatrix<f64>) { (resid(p), numeric_jacobian(&resid, p)) };
    let span = 1.0;
    let lower = [k.d_gs - span, 0.0, 1e-4, 0.0, 0.0, base - 1.0];
    let upper = [k.d_gs + span, 5.0, 5.0, 2.0, 2.0, base + 1.0];
    let mut best: Option<super::lm::LmOutcome> = None;
    for nu0 in [0.05, 0.1, 0.2, 0.4, 0.8] {
        let p0 = [k.d_gs, nu0, 0.1, c0 * 2.0, c1, base];
        let o = levenberg_marquardt(&model, &p0, &lower, &upper, 300);
        if best.as_ref().map_or(true, |b| o.cost < b.cost) {
            best = Some(o);
        }
    }
    let o = best.expect("starts");
    let n = s.len();
    let dof = n.saturating_sub(6).max(1) as f64;
    let cov = (o.jacobian.transpose() * &o.jacobian).try_inverse();
    let nu_err = cov.map_or(0.0, |c| (c[(1, 1)] * 2.0 * o.cost / dof).max(0.0).sqrt());
    let p = &o.params;
    if p[3] <= 1e-9 {
        return Ok(OdmrFit { residual_norm: (2.0 * o.cost).sqrt(), ..flat });
    }
    let nu_khz = p[1] * 1e3;
    Ok(OdmrFit {
        nu_dip_khz: nu_khz,
        nu_dip_err_khz: nu_err * 1e3,
        sigma_e: nu_khz * 1e3 / k.d_perpendicular,
        gamma_elec_khz: gamma_elec_from_nu(nu_khz, k),
        power_width_khz: p[2] * 1e3,
        center_mhz: p[0],
        residual_norm: (2.0 * o.cost).sqrt(),
        converged: o.converged,
    })
}

/// Γ_elec = ν·d∥/d⊥ (kHz in, kHz out).
pub fn gamma_elec_from_nu(nu_khz: f64, k: &PhysicalConstants) -> f64 {
    nu_khz * k.d_parallel / k.d_perpendicular
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sigma_for(nu_khz: f64, k: &PhysicalConstants) -> f64 {
        nu_khz * 1e3 / k.d_perpendicular
    }

    #[test]
    fn no_field_gives_single_lorentzian() {
        let k = PhysicalConstants::default();
        let s = synth_zero_field_odmr(&OdmrSynthParams::default(), &k).unwrap();
        let i = s.freq.iter().position(|f| (f - k.d_gs).abs() < 1e-9).unwrap();
        let min = s.contrast.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(s.contrast[i], min);
        let f = fit_zero_field_odmr(&s, &k).unwrap();
        assert!(f.nu_dip_khz < 10.0, "{}", f.nu_dip_khz);
    }

    #[test]
    fn round_trip_220_khz() {
        let k = PhysicalConstants::default();
        let p = OdmrSynthParams { sigma_e: sigma_for(220.0, &k), ..Default::default() };
        let f = fit_zero_field_odmr(&synth_zero_field_odmr(&p, &k).unwrap(), &k).unwrap();
        assert!((f.nu_dip_khz / 220.0 - 1.0).abs() < 0.05, "{}", f.nu_dip_khz);
        assert!((f.sigma_e / p.sigma_e - 1.0).abs() < 0.05);
        assert!((f.gamma_elec_khz - 4.53).abs() < 0.25);
    }

    #[test]
    fn flat_spectrum() {
        let k = PhysicalConstants::default();
        let freq: Vec<f64> = (0..50).map(|i| 2866.0 + 0.16 * i as f64).collect();
        let s = OdmrSpectrum::new(freq, vec![1.0; 50], vec![0.0; 50]).unwrap();
        assert_eq!(fit_zero_field_odmr(&s, &k).unwrap().nu_dip_khz, 0.0);
    }

    #[test]
    fn lineshape_is_normalized_like_its_lorentzian() {
        // Area is preserved by convolution with a unit-mass distribution.
        let area = |nu: f64| (0..40001).map(|i| dip_lineshape(-20.0 + 0.001 * i as f64, nu, 0.1)).sum::<f64>() * 0.001;
        assert!((area(0.3) / area(0.0) - 1.0).abs() < 2e-3);
    }
}
