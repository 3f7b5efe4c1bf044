use serde::{Deserialize, Serialize};

use super::{sequence_duration_us, simulate_interacting_pairs, DecayCurve, NoiseModel, PulseParams, SequenceKind, SequenceSpec, Sweep};
use crate::error::{Error, Result};
use crate::fitkit::{fit_decay, FitModel};

/// Relative change between Γ(N_max) and Γ(N_max/2) above which the sweep is flagged.
pub const CONVERGENCE_TOL: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: u32,
    pub rate_khz: f64,
    pub rate_err_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub family: SequenceKind,
    pub points: Vec<ConvergencePoint>,
    /// Γ at the largest N.
    pub asymptote_khz: f64,
    pub converged: bool,
}

/// Signal level below which later points are dropped from rate fits. Pair signals
/// oscillate and revive after the first decay, which no monotone model describes.
pub const DECAY_WINDOW_FLOOR: f64 = 0.2;

/// Rate of the initial decay: stretched-exponential fit up to the first point below
/// [`DECAY_WINDOW_FLOOR`].
pub fn initial_decay_rate(c: &DecayCurve) -> Result<(f64, f64)> {
    let end = c.signal.iter().position(|s| *s < DECAY_WINDOW_FLOOR).map_or(c.len(), |i| i + 1);
    let w = DecayCurve::new(c.t[..end].to_vec(), c.signal[..end].to_vec(), c.sigma[..end].to_vec())?;
    let f = fit_decay(&w, FitModel::StretchedExp, None)?;
    Ok((f.rate_khz, f.errors.rate_khz))
}

/// Same total-time grid for every N: τ = (T − pulse time) / (pulse count). Times too
/// short to hold the pulses are skipped.
pub fn sweep_convergence(
    noise: &NoiseModel,
    pulses: &PulseParams,
    family: SequenceKind,
    n_list: &[u32],
    total_us: &[f64],
) -> Result<ConvergenceTable> {
    if n_list.is_empty() {
        return Err(Error::InvalidInput("empty N list".into()));
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let probe = SequenceSpec { kind: family, tau_ns: 1.0, n, sweep: Sweep::NFixedTau(vec![n]) };
        let count = probe.pulse_count(n).max(1) as f64;
        let overhead = sequence_duration_us(&probe, pulses, 0.0, n);
        let taus: Vec<f64> = total_us.iter().map(|t| (t - overhead) / count * 1e3).collect();
        let taus: Vec<f64> = taus.into_iter().filter(|t| *t > 0.0).collect();
        if taus.len() < 8 {
            return Err(Error::InvalidInput(format!("fewer than 8 feasible times for N = {n} with finite pulses")));
        }
        let seq = SequenceSpec::tau_sweep(family, n, taus);
        let (rate, err) = initial_decay_rate(&simulate_interacting_pairs(noise, pulses, &seq)?)?;
        points.push(ConvergencePoint { n, rate_khz: rate, rate_err_khz: err });
    }
    let nmax = *n_list.iter().max().expect("non-empty");
    let at = |n: u32| points.iter().find(|p| p.n == n).map(|p| p.rate_khz);
    let asymptote = at(nmax).expect("present");
    let converged = match at(nmax / 2) {
        Some(half) => (asymptote - half).abs() <= CONVERGENCE_TOL * asymptote.abs(),
        None => false,
    };
    Ok(ConvergenceTable { family, points, asymptote_khz: asymptote, converged })
}

/// Ramsey rate with disorder and pulse errors switched off.
pub fn interaction_only_rate(noise: &NoiseModel, total_us: &[f64]) -> Result<(f64, f64)> {
    let quiet = NoiseModel { disorder_sigma: 0.0, ..*noise };
    let seq = SequenceSpec::tau_sweep(SequenceKind::Ramsey, 1, total_us.iter().map(|t| t * 1e3).collect());
    initial_decay_rate(&simulate_interacting_pairs(&quiet, &PulseParams::ideal(), &seq)?)
}
