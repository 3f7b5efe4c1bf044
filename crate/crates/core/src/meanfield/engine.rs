use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bath::{BathLevels, BathSpeciesSpec};
use super::gates::SequenceGates;
use super::quadrature::{integrate_sphere, SphereGrid};
use crate::constants::{PhysicalConstants, PPM_PER_NM3};
use crate::error::{Error, Result};
use crate::spin_core::Vec3;

/// Relative tolerance between successive sphere grids.
pub const QUADRATURE_TOL: f64 = 1e-3;

/// A rate per unit bath density with the context it was computed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePerDensity {
    /// kHz/ppm
    pub value: f64,
    pub species: String,
    pub b_gauss: f64,
    pub sequence: String,
    pub transition: Option<(usize, usize)>,
}

/// One starting level's effective coupling vector (µs·spin) and its weight.
#[derive(Debug, Clone, Copy)]
pub struct Term {
    pub group: usize,
    pub level: usize,
    pub weight: f64,
    pub vector: Vec3,
}

/// Effective vectors E_i = ∫ s(t) e_{level(t)} dt for every populated starting level.
pub fn effective_terms(
    bath: &BathSpeciesSpec,
    levels: &[BathLevels],
    gates: &SequenceGates,
) -> Vec<Term> {
    let mut out = Vec::new();
    for (g, (grp, lv)) in bath.orientations.iter().zip(levels).enumerate() {
        let n = lv.coupling.len();
        for i in 0..n {
            let p = lv.populations[i] * grp.weight;
            if p == 0.0 {
                continue;
            }
            let w = gates.level_weights(i, g, n);
            let v = w.iter().zip(&lv.coupling).fold(Vec3::zeros(), |acc, (c, e)| acc + e * *c);
            out.push(Term { group: g, level: i, weight: p, vector: v });
        }
    }
    out
}

/// Kernel prefactor: exponent = K·n·Σ w ∫|a·E| dΩ with K = (π/6)·2π·J.
fn kernel_prefactor(bath: &BathSpeciesSpec, k: &PhysicalConstants) -> f64 {
    std::f64::consts::PI / 6.0 * 2.0 * std::f64::consts::PI * k.dipolar_j(k.gamma_e, bath.gamma)
}

/// ∫ Σ w_i |a(r̂)·E_i| dΩ with a = ẑ − 3(ẑ·r̂)r̂, on one grid.
pub fn angular_sum(grid: &SphereGrid, terms: &[Term]) -> f64 {
    grid.points
        .par_iter()
        .zip(grid.weights.par_iter())
        .map(|(p, w)| {
            let a = Vec3::new(-3.0 * p.z * p.x, -3.0 * p.z * p.y, 1.0 - 3.0 * p.z * p.z);
            w * terms.iter().map(|t| t.weight * a.dot(&t.vector).abs()).sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Converged angular integral; zero when all vectors vanish.
pub fn angular_integral(terms: &[Term]) -> Result<f64> {
    if terms.iter().all(|t| t.weight == 0.0 || t.vector.norm() == 0.0) {
        return Ok(0.0);
    }
    Ok(integrate_sphere(|g| angular_sum(g, terms), QUADRATURE_TOL)?.value)
}

/// Decay rate (kHz) from a bath at `density` (ppm) for a sequence at lab field `b` (T).
pub fn ensemble_decay_rate(
    bath: &BathSpeciesSpec,
    b: &Vec3,
    gates: &SequenceGates,
    density: f64,
    k: &PhysicalConstants,
) -> Result<f64> {
    if !(density >= 0.0) || !density.is_finite() {
        return Err(Error::InvalidInput("density must be ≥ 0".into()));
    }
    gates.validate()?;
    let levels = all_levels(bath, b, k)?;
    let terms = effective_terms(bath, &levels, gates);
    let integral = angular_integral(&terms)?;
    Ok(rate_from_integral(bath, k, integral, density, gates.sweep_length))
}

pub(crate) fn rate_from_integral(
    bath: &BathSpeciesSpec,
    k: &PhysicalConstants,
    integral: f64,
    density: f64,
    sweep_length: f64,
) -> f64 {
    let exponent = kernel_prefactor(bath, k) * density * PPM_PER_NM3 * integral;
    exponent / sweep_length * 1e3
}

pub fn all_levels(bath: &BathSpeciesSpec, b: &Vec3, k: &PhysicalConstants) -> Result<Vec<BathLevels>> {
    (0..bath.orientations.len()).map(|g| bath.levels(g, b, k)).collect()
}

/// Closed form for an aligned spin-½ bath: (4π²/9√3)·(2πJ)·n, in kHz/ppm.
pub fn analytic_rate_aligned_halfspin(gamma_b: f64, k: &PhysicalConstants) -> Result<RatePerDensity> {
    if !(gamma_b > 0.0) {
        return Err(Error::InvalidInput("γ_B must be positive".into()));
    }
    let pi = std::f64::consts::PI;
    let j = k.dipolar_j(k.gamma_e, gamma_b);
    let value = 4.0 * pi * pi / (9.0 * 3f64.sqrt()) * 2.0 * pi * j * PPM_PER_NM3 * 1e3;
    Ok(RatePerDensity {
        value,
        species: "spin-1/2".into(),
        b_gauss: f64::INFINITY,
        sequence: "free".into(),
        transition: None,
    })
}
