use serde::{Deserialize, Serialize};

use super::bath::{axial_field, BathSpeciesSpec, LevelPopulations};
use super::engine::{
    all_levels, angular_integral, effective_terms, ensemble_decay_rate, rate_from_integral,
    RatePerDensity,
};
use super::gates::SequenceGates;
use crate::constants::{PhysicalConstants, GAUSS};
use crate::error::{Error, Result};
use crate::spin_core::{
    spin_operators, transition_spectrum_multi, Orientation, SpinQuantum, Transition, Vec3,
};

/// Flip-contrast factor that models finite bath pulses (11 → 13 kHz/ppm).
pub const FINITE_PULSE_FLIP_FACTOR: f64 = 13.0 / 11.0;
/// Relative amplitude threshold for allowed bath transitions.
pub const DRIVE_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeerMode {
    /// Fixed echo of length 2·T_fix (µs), bath pulse position swept.
    PulseSweep { t_fix: f64 },
    /// Echo length swept, bath pulse together with the sensor π pulse.
    DurationSweep,
}

/// Allowed transitions of one orientation class under an RF field of arbitrary direction.
pub fn bath_transitions(
    bath: &BathSpeciesSpec,
    group: usize,
    b: &Vec3,
    k: &PhysicalConstants,
) -> Result<Vec<Transition>> {
    let h = bath.hamiltonian(group, b, k)?;
    let [dx, dy, dz] = bath.rf_drives(group);
    transition_spectrum_multi(&h, &[&dx, &dy, &dz], DRIVE_THRESHOLD)
}

/// DEER rate per ppm for bath transition `pair` of orientation class `group`.
pub fn deer_rate(
    bath: &BathSpeciesSpec,
    b: &Vec3,
    group: usize,
    pair: (usize, usize),
    mode: DeerMode,
    finite_pulse_correction: bool,
    k: &PhysicalConstants,
) -> Result<RatePerDensity> {
    let (lo, hi) = (pair.0.min(pair.1), pair.0.max(pair.1));
    let allowed = bath_transitions(bath, group, b, k)?
        .iter()
        .any(|t| t.lower == lo && t.upper == hi && t.freq > 0.0);
    if !allowed {
        return Err(Error::ForbiddenTransition(pair.0, pair.1));
    }
    let eta = if finite_pulse_correction { FINITE_PULSE_FLIP_FACTOR } else { 1.0 };
    let (gates, label) = match mode {
        DeerMode::DurationSweep => (SequenceGates::deer_duration(1.0, (lo, hi), vec![group], eta)?, "deer_duration"),
        DeerMode::PulseSweep { t_fix } => (
            SequenceGates::deer_pulse_sweep(t_fix, 0.5 * t_fix, (lo, hi), vec![group], eta)?,
            "deer_pulse",
        ),
    };
    // Only the addressed class contributes; the others are refocused by the echo.
    let value = ensemble_decay_rate(bath, b, &gates, 1.0, k)?;
    Ok(RatePerDensity {
        value,
        species: bath.name.clone(),
        b_gauss: b.norm() / GAUSS,
        sequence: label.into(),
        transition: Some((lo, hi)),
    })
}

/// Allowed transition nearest `freq` (MHz) over all orientation classes.
pub fn nearest_transition(
    bath: &BathSpeciesSpec,
    b: &Vec3,
    freq: f64,
    k: &PhysicalConstants,
) -> Result<(usize, Transition)> {
    let mut best: Option<(usize, Transition)> = None;
    for g in 0..bath.orientations.len() {
        for t in bath_transitions(bath, g, b, k)? {
            if t.freq <= 0.0 {
                continue;
            }
            if best.map_or(true, |(_, bt)| (t.freq - freq).abs() < (bt.freq - freq).abs()) {
                best = Some((g, t));
            }
        }
    }
    best.ok_or_else(|| Error::InvalidInput("bath has no allowed transitions".into()))
}

/// One row of the P1 rate-vs-field table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRate {
    pub b_gauss: f64,
    pub group: usize,
    pub level: usize,
    /// kHz/ppm contributed by this level (population and class weight included).
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingCurvePoint {
    pub b_gauss: f64,
    pub levels: Vec<LevelRate>,
    pub total: f64,
}

/// Free-evolution dephasing per ppm versus axial field, per level and in total.
pub fn total_dephasing_curve(
    bath: &BathSpeciesSpec,
    b_gauss: &[f64],
    k: &PhysicalConstants,
) -> Result<Vec<DephasingCurvePoint>> {
    let mut out = Vec::with_capacity(b_gauss.len());
    for &bg in b_gauss {
        if !(bg > 0.0) {
            return Err(Error::InvalidInput("field values must be positive".into()));
        }
        let b = axial_field(bg);
        let gates = SequenceGates::free(1.0)?;
        let levels = all_levels(bath, &b, k)?;
        let terms = effective_terms(bath, &levels, &gates);
        let mut rows = Vec::new();
        let mut total = 0.0;
        for t in &terms {
            let integral = angular_integral(std::slice::from_ref(t))?;
            let rate = rate_from_integral(bath, k, integral, 1.0, 1.0);
            total += rate;
            rows.push(LevelRate { b_gauss: bg, group: t.group, level: t.level, rate });
        }
        out.push(DephasingCurvePoint { b_gauss: bg, levels: rows, total });
    }
    Ok(out)
}

/// Free-evolution dephasing per ppm at one lab field.
pub fn free_rate(bath: &BathSpeciesSpec, b: &Vec3, k: &PhysicalConstants) -> Result<f64> {
    ensemble_decay_rate(bath, b, &SequenceGates::free(1.0)?, 1.0, k)
}

pub type Pairing = [(usize, usize); 3];

/// All perfect matchings of six levels into three pairs.
pub fn enumerate_pairings() -> Vec<Pairing> {
    fn rec(rem: &[usize], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Pairing>) {
        if rem.is_empty() {
            out.push([cur[0], cur[1], cur[2]]);
            return;
        }
        let a = rem[0];
        for idx in 1..rem.len() {
            let b = rem[idx];
            let next: Vec<usize> = rem.iter().copied().filter(|&x| x != a && x != b).collect();
            cur.push((a, b));
            rec(&next, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(&[0, 1, 2, 3, 4, 5], &mut Vec::new(), &mut out);
    out
}

/// Residual free-evolution rate (kHz/ppm) of one class with `pairs` continuously driven.
pub fn driven_group_rate(
    bath: &BathSpeciesSpec,
    b: &Vec3,
    group: usize,
    pairs: &[(usize, usize)],
    k: &PhysicalConstants,
) -> Result<f64> {
    let gates = SequenceGates::driven_free(1.0, pairs, group)?;
    let levels = all_levels(bath, b, k)?;
    let terms: Vec<_> = effective_terms(bath, &levels, &gates).into_iter().filter(|t| t.group == group).collect();
    Ok(rate_from_integral(bath, k, angular_integral(&terms)?, 1.0, 1.0))
}

/// Residual with the first class driven by its own best pairing and every other
/// class driven by `pairing`.
pub fn bath_driving_residual(
    bath: &BathSpeciesSpec,
    b: &Vec3,
    pairing: &Pairing,
    k: &PhysicalConstants,
) -> Result<f64> {
    let mut total = best_for_group(bath, b, 0, k)?.1;
    for g in 1..bath.orientations.len() {
        total += driven_group_rate(bath, b, g, pairing, k)?;
    }
    Ok(total)
}

fn best_for_group(bath: &BathSpeciesSpec, b: &Vec3, group: usize, k: &PhysicalConstants) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (i, p) in enumerate_pairings().iter().enumerate() {
        let r = driven_group_rate(bath, b, group, p, k)?;
        if r < best.1 {
            best = (i, r);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathDrivingResult {
    pub b_gauss: f64,
    pub undriven: f64,
    /// Residual for each of the 15 pairings applied to the off-axis classes.
    pub residuals: Vec<f64>,
    pub best_index: usize,
    pub best_pairing: Pairing,
    pub best_residual: f64,
    pub suppression: f64,
}

/// Scan all 15 pairings and report the best one.
pub fn best_pairing(bath: &BathSpeciesSpec, b: &Vec3, k: &PhysicalConstants) -> Result<BathDrivingResult> {
    if bath.dim() != 6 {
        return Err(Error::InvalidInput("pairing scan needs a six-level bath".into()));
    }
    let undriven = free_rate(bath, b, k)?;
    let pairings = enumerate_pairings();
    let on = best_for_group(bath, b, 0, k)?.1;
    let mut residuals = Vec::with_capacity(pairings.len());
    for p in &pairings {
        let mut r = on;
        for g in 1..bath.orientations.len() {
            r += driven_group_rate(bath, b, g, p, k)?;
        }
        residuals.push(r);
    }
    let (best_index, best_residual) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |a, (i, r)| if r < a.1 { (i, r) } else { a });
    Ok(BathDrivingResult {
        b_gauss: b.norm() / GAUSS,
        undriven,
        residuals,
        best_index,
        best_pairing: pairings[best_index],
        best_residual,
        suppression: undriven / best_residual,
    })
}

/// Field used for the NV DEER factor: 30 G tilted off the sensor axis so all four
/// NV classes resolve.
pub fn nv_deer_default_field() -> Vec3 {
    let dir = Vec3::new(0.8, 0.3, 0.5).normalize();
    dir * (30.0 * GAUSS)
}

/// DEER on one off-axis NV class (¼ of the NVs), laser-polarized into m_s = 0,
/// addressing the m_s 0 ↔ −1 line of one ¹⁴N hyperfine component (m_I).
pub fn nv_offaxis_deer_rate_for(b: &Vec3, m_i: i32, k: &PhysicalConstants) -> Result<RatePerDensity> {
    let bath = BathSpeciesSpec::nv_group(k, Orientation::off_axis(0), 0.25);
    nv_deer_with_bath(&bath, b, m_i, k)
}

pub fn nv_deer_with_bath(bath: &BathSpeciesSpec, b: &Vec3, m_i: i32, k: &PhysicalConstants) -> Result<RatePerDensity> {
    let levels = bath.levels(0, b, k)?;
    let ni = bath.nuclear_spin.map_or(1, |n| n.dim());
    let sz = spin_operators(SpinQuantum::one()).embed(1, ni).sz;
    let izf = spin_operators(bath.nuclear_spin.unwrap_or(SpinQuantum::new(0.0)?)).embed(3, 1).sz;
    let find = |ms: f64, mi: f64| -> usize {
        (0..levels.energies.len())
            .max_by(|&a, &c| {
                let score = |i: usize| {
                    let v = levels.eig.vector(i);
                    -(sz.expectation(&v) - ms).abs() - (izf.expectation(&v) - mi).abs()
                };
                score(a).total_cmp(&score(c))
            })
            .unwrap()
    };
    let a = find(0.0, m_i as f64);
    let c = find(-1.0, m_i as f64);
    if matches!(bath.orientations[0].populations, LevelPopulations::Thermal) {
        return Err(Error::InvalidInput("NV DEER expects a polarized bath".into()));
    }
    deer_rate(bath, b, 0, (a, c), DeerMode::DurationSweep, false, k)
}

/// NV off-axis DEER factor at the default configuration (m_I = 0 line).
pub fn nv_offaxis_deer_rate(k: &PhysicalConstants) -> Result<RatePerDensity> {
    nv_offaxis_deer_rate_for(&nv_deer_default_field(), 0, k)
}
