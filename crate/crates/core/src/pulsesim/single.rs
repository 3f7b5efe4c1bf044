use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mc_statistics, DecayCurve, SequenceKind, SequenceSpec};
use crate::error::{Error, Result};

/// Static inhomogeneity of a spin-1 ensemble: H = δ·Sz² + A·Sz, both Gaussian (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleSpinNoise {
    pub delta_sigma: f64,
    pub a_sigma: f64,
    pub seed: u64,
}

// Amplitudes indexed by m + 1, so [c₋₁, c₀, c₊₁].
type Amps = [Complex64; 3];

fn free(c: &mut Amps, delta: f64, a: f64, t: f64) {
    for (i, ci) in c.iter_mut().enumerate() {
        let m = i as f64 - 1.0;
        let phase = -std::f64::consts::TAU * (delta * m * m + a * m) * t;
        *ci *= Complex64::from_polar(1.0, phase);
    }
}

/// Coherence signal after one sequence with ideal instantaneous pulses.
fn single_trace(kind: SequenceKind, pulses: u32, free_us: f64, delta: f64, a: f64) -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = Complex64::new(0.0, 0.0);
    let r = Complex64::new(h, 0.0);
    let (mut c, swap): (Amps, Option<(usize, usize)>) = match kind {
        SequenceKind::DqRamsey => ([r, z, r], None),
        SequenceKind::StrainCpmg => ([z, r, r], Some((0, 2))),
        SequenceKind::Ramsey => ([z, r, r], None),
        _ => ([z, r, r], Some((1, 2))),
    };
    if pulses == 0 {
        free(&mut c, delta, a, free_us);
    } else {
        let tau = free_us / pulses as f64;
        for _ in 0..pulses {
            free(&mut c, delta, a, 0.5 * tau);
            let (i, j) = swap.expect("pulsed sequence");
            c.swap(i, j);
            free(&mut c, delta, a, 0.5 * tau);
        }
    }
    // Read out whichever pair of levels currently carries the coherence.
    let (lo, hi) = match kind {
        SequenceKind::DqRamsey => (0, 2),
        _ => {
            let other = if c[0].norm_sqr() > c[2].norm_sqr() { 0 } else { 2 };
            (1, other)
        }
    };
    2.0 * (c[lo].conj() * c[hi]).re
}

/// Ensemble-averaged coherence of a spin-1 under static Sz / Sz² disorder.
pub fn simulate_single_spin_ensemble(noise: &SingleSpinNoise, seq: &SequenceSpec, draws: usize) -> Result<DecayCurve> {
    seq.validate()?;
    if seq.kind.is_deer() {
        return Err(Error::InvalidInput("DEER sequences are handled by the mean-field module".into()));
    }
    if noise.delta_sigma < 0.0 || noise.a_sigma < 0.0 {
        return Err(Error::InvalidInput("negative noise sigma".into()));
    }
    let nd = Normal::new(0.0, 1.0).expect("unit normal");
    let pts = seq.points();
    let traces: Vec<Vec<f64>> = (0..draws.max(2))
        .into_par_iter()
        .map(|d| {
            let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
            rng.set_stream(d as u64);
            let delta = noise.delta_sigma * nd.sample(&mut rng);
            let a = noise.a_sigma * nd.sample(&mut rng);
            pts.iter()
                .map(|&(tau, n)| single_trace(seq.kind, seq.pulse_count(n), seq.free_time_us(tau, n), delta, a))
                .collect()
        })
        .collect();
    let st = mc_statistics(&traces)?;
    let t = pts.iter().map(|&(tau, n)| seq.free_time_us(tau, n)).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    curve_sorted(t, st.mean, st.stderr, &mut order).map(|c| {
        c.with_meta("sequence", seq.kind.name())
            .with_meta("delta_sigma_mhz", noise.delta_sigma)
            .with_meta("a_sigma_mhz", noise.a_sigma)
            .with_meta("seed", noise.seed)
            .with_meta("draws", draws.max(2))
    })
}

/// Builds a curve after sorting by time (N sweeps can arrive unordered).
pub(crate) fn curve_sorted(t: Vec<f64>, y: Vec<f64>, s: Vec<f64>, order: &mut [usize]) -> Result<DecayCurve> {
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    DecayCurve::new(
        order.iter().map(|&i| t[i]).collect(),
        order.iter().map(|&i| y[i]).collect(),
        order.iter().map(|&i| s[i]).collect(),
    )
}
