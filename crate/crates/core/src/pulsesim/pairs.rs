use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector3, Vector4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use super::single::curve_sorted;
use super::{mc_statistics, DecayCurve, SequenceKind, SequenceSpec};
use crate::error::{Error, Result};

type M4 = Matrix4<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    /// π-pulse length in ns; 0 means instantaneous pulses.
    pub pi_duration_ns: f64,
    /// Relative Rabi-amplitude error, drawn once per ensemble member.
    pub amplitude_error_sigma: f64,
}

impl PulseParams {
    pub fn ideal() -> Self {
        Self { pi_duration_ns: 0.0, amplitude_error_sigma: 0.0 }
    }

    /// Rabi frequency in MHz (∞ for ideal pulses).
    pub fn rabi_mhz(&self) -> f64 {
        if self.pi_duration_ns > 0.0 {
            1.0 / (2.0 * self.pi_duration_ns * 1e-3)
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi_duration_ns >= 0.0) || !(0.0..1.0).contains(&self.amplitude_error_sigma) {
            return Err(Error::InvalidInput("pi duration must be >= 0 and error in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionDistribution {
    /// v ∝ 1 − 3cos²θ over a uniformly random pair orientation, scaled to unit std.
    #[default]
    Dipolar,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Gaussian per-spin detuning std, rad/s.
    pub disorder_sigma: f64,
    /// std of the pair coupling v, rad/s.
    pub interaction_scale: f64,
    #[serde(default)]
    pub distribution: InteractionDistribution,
    pub ensemble_draws: usize,
    pub seed: u64,
}

impl NoiseModel {
    /// Disorder 2π×1 MHz, coupling 2π×10 kHz, 2000 draws.
    pub fn reference() -> Self {
        Self {
            disorder_sigma: 2.0 * PI * 1e6,
            interaction_scale: 2.0 * PI * 1e4,
            distribution: InteractionDistribution::Dipolar,
            ensemble_draws: 2000,
            seed: 20_240_601,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.disorder_sigma >= 0.0) || !(self.interaction_scale >= 0.0) || self.ensemble_draws < 1 {
            return Err(Error::InvalidInput("sigmas must be >= 0 and draws >= 1".into()));
        }
        Ok(())
    }
}

/// One ensemble member: detunings and coupling in rad/µs, relative amplitude error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDraw {
    pub h1: f64,
    pub h2: f64,
    pub v: f64,
    pub eps: f64,
}

impl PairDraw {
    pub fn sample(noise: &NoiseModel, pulses: &PulseParams, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(index);
        let nd = Normal::new(0.0, 1.0).expect("unit normal");
        let s = noise.disorder_sigma * 1e-6;
        let h1 = s * nd.sample(&mut rng);
        let h2 = s * nd.sample(&mut rng);
        let v = noise.interaction_scale
            * 1e-6
            * match noise.distribution {
                InteractionDistribution::Fixed => 1.0,
                InteractionDistribution::Dipolar => {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    (1.0 - 3.0 * x * x) / 0.8f64.sqrt()
                }
            };
        let eps = pulses.amplitude_error_sigma * nd.sample(&mut rng);
        Self { h1, h2, v, eps }
    }
}

fn pauli() -> [Matrix2<Complex64>; 3] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(0.5, 0.0);
    let i = Complex64::new(0.0, 0.5);
    [
        Matrix2::new(z, o, o, z),
        Matrix2::new(z, -i, i, z),
        Matrix2::new(o, z, z, -o),
    ]
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> M4 {
    M4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

struct PairOps {
    s1: [M4; 3],
    s2: [M4; 3],
}

impl PairOps {
    fn new() -> Self {
        let p = pauli();
        let id = Matrix2::identity();
        Self {
            s1: std::array::from_fn(|k| kron(&p[k], &id)),
            s2: std::array::from_fn(|k| kron(&id, &p[k])),
        }
    }

    fn free_h(&self, d: &PairDraw) -> M4 {
        let c = |x: f64| Complex64::new(x, 0.0);
        self.s1[2] * c(d.h1)
            + self.s2[2] * c(d.h2)
            + (self.s1[0] * self.s2[0] + self.s1[1] * self.s2[1] - self.s1[2] * self.s2[2]) * c(d.v)
    }

    fn drive(&self, phase: f64) -> M4 {
        let (cs, sn) = (phase.cos(), phase.sin());
        (self.s1[0] + self.s2[0]) * Complex64::new(cs, 0.0) + (self.s1[1] + self.s2[1]) * Complex64::new(sn, 0.0)
    }
}

/// exp(−iHt) for Hermitian H via its eigendecomposition.
fn expm_h(h: &M4, t: f64) -> M4 {
    let e = SymmetricEigen::new(*h);
    let d = M4::from_diagonal(&Vector4::from_fn(|i, _| Complex64::from_polar(1.0, -e.eigenvalues[i] * t)));
    e.eigenvectors * d * e.eigenvectors.adjoint()
}

fn mat_pow(m: &M4, mut n: u32) -> M4 {
    let mut base = *m;
    let mut acc = M4::identity();
    while n > 0 {
        if n & 1 == 1 {
            acc = base * acc;
        }
        base = base * base;
        n >>= 1;
    }
    acc
}

struct Propagators<'a> {
    ops: &'a PairOps,
    h0: M4,
    eig: SymmetricEigen<Complex64, nalgebra::U4>,
    pulses: PulseParams,
    eps: f64,
}

impl<'a> Propagators<'a> {
    fn new(ops: &'a PairOps, d: &PairDraw, pulses: PulseParams) -> Self {
        let h0 = ops.free_h(d);
        Self { ops, h0, eig: SymmetricEigen::new(h0), pulses, eps: d.eps }
    }

    fn free(&self, t: f64) -> M4 {
        let e = &self.eig;
        let d = M4::from_diagonal(&Vector4::from_fn(|i, _| Complex64::from_polar(1.0, -e.eigenvalues[i] * t)));
        e.eigenvectors * d * e.eigenvectors.adjoint()
    }

    /// Rotation by `angle` about an in-plane axis at `phase`, including free evolution during the pulse.
    fn pulse(&self, angle: f64, phase: f64) -> M4 {
        let drive = self.ops.drive(phase);
        let amp = angle * (1.0 + self.eps);
        if self.pulses.pi_duration_ns > 0.0 {
            let t = self.pulses.pi_duration_ns * 1e-3 * angle / PI;
            let omega = amp / t;
            expm_h(&(self.h0 + drive * Complex64::new(omega, 0.0)), t)
        } else {
            expm_h(&drive, amp)
        }
    }
}

/// Duration of one point's sequence (µs), pulses included.
pub fn sequence_duration_us(seq: &SequenceSpec, pulses: &PulseParams, tau_ns: f64, n: u32) -> f64 {
    let tp = pulses.pi_duration_ns * 1e-3;
    0.5 * tp + seq.pulse_count(n) as f64 * tp + seq.free_time_us(tau_ns, n)
}

fn total_unitary(p: &Propagators, kind: SequenceKind, tau_us: f64, n: u32) -> M4 {
    let init = p.pulse(FRAC_PI_2, 0.0);
    let body = match kind.phases() {
        None => p.free(tau_us),
        Some(phases) => {
            let half = p.free(0.5 * tau_us);
            let unit = phases.iter().fold(M4::identity(), |acc, &ph| half * p.pulse(PI, ph) * half * acc);
            let reps = if kind == SequenceKind::Hahn { 1 } else { n };
            mat_pow(&unit, reps)
        }
    };
    body * init
}

fn bloch1(ops: &PairOps, psi: &Vector4<Complex64>) -> Vector3<f64> {
    Vector3::from_fn(|k, _| 2.0 * (psi.adjoint() * ops.s1[k] * psi)[(0, 0)].re)
}

/// Per-draw spin-1 signal over all sweep points.
fn pair_trace(ops: &PairOps, seq: &SequenceSpec, pulses: PulseParams, d: &PairDraw, refs: &[Vector3<f64>]) -> Vec<f64> {
    let p = Propagators::new(ops, d, pulses);
    let mut up = Vector4::zeros();
    up[0] = Complex64::new(1.0, 0.0);
    seq.points()
        .iter()
        .zip(refs)
        .map(|(&(tau, n), r)| {
            let u = total_unitary(&p, seq.kind, tau * 1e-3, n);
            bloch1(ops, &(u * up)).dot(r)
        })
        .collect()
}

/// Noise-free final Bloch vectors (unit length up to pulse transients), used as readout axes.
fn reference_axes(ops: &PairOps, seq: &SequenceSpec, pulses: PulseParams) -> Vec<Vector3<f64>> {
    let ideal = PairDraw { h1: 0.0, h2: 0.0, v: 0.0, eps: 0.0 };
    let p = Propagators::new(ops, &ideal, pulses);
    let mut up = Vector4::zeros();
    up[0] = Complex64::new(1.0, 0.0);
    seq.points()
        .iter()
        .map(|&(tau, n)| {
            let b = bloch1(ops, &(total_unitary(&p, seq.kind, tau * 1e-3, n) * up));
            b / b.norm_squared().max(1e-300)
        })
        .collect()
}

/// Ensemble-averaged coherence of one spin of a dipolar-coupled pair under a pulse sequence.
pub fn simulate_interacting_pairs(noise: &NoiseModel, pulses: &PulseParams, seq: &SequenceSpec) -> Result<DecayCurve> {
    noise.validate()?;
    pulses.validate()?;
    seq.validate()?;
    if matches!(seq.kind, SequenceKind::DqRamsey | SequenceKind::StrainCpmg) || seq.kind.is_deer() {
        return Err(Error::InvalidInput(format!("{} needs a spin-1 or bath model, not a two-level pair", seq.kind.name())));
    }
    let ops = PairOps::new();
    let refs = reference_axes(&ops, seq, *pulses);
    let draws = noise.ensemble_draws.max(2);
    let traces: Vec<Vec<f64>> = (0..draws as u64)
        .into_par_iter()
        .map(|i| pair_trace(&ops, seq, *pulses, &PairDraw::sample(noise, pulses, i), &refs))
        .collect();
    let st = mc_statistics(&traces)?;
    let pts = seq.points();
    let t = pts.iter().map(|&(tau, n)| sequence_duration_us(seq, pulses, tau, n)).collect();
    let mut order: Vec<usize> = (0..pts.len()).collect();
    Ok(curve_sorted(t, st.mean, st.stderr, &mut order)?
        .with_meta("sequence", seq.kind.name())
        .with_meta("disorder_sigma_rad_s", noise.disorder_sigma)
        .with_meta("interaction_scale_rad_s", noise.interaction_scale)
        .with_meta("pi_duration_ns", pulses.pi_duration_ns)
        .with_meta("pulse_error", pulses.amplitude_error_sigma)
        .with_meta("draws", draws)
        .with_meta("seed", noise.seed))
}

/// Largest ‖U†U − 1‖ over the propagators one draw uses; exposed for checks.
pub fn unitarity_defect(noise: &NoiseModel, pulses: &PulseParams, seq: &SequenceSpec, draw: u64) -> f64 {
    let ops = PairOps::new();
    let d = PairDraw::sample(noise, pulses, draw);
    let p = Propagators::new(&ops, &d, *pulses);
    seq.points()
        .iter()
        .map(|&(tau, n)| {
            let u = total_unitary(&p, seq.kind, tau * 1e-3, n);
            (u.adjoint() * u - M4::identity()).norm()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> NoiseModel {
        NoiseModel { disorder_sigma: 0.0, interaction_scale: 0.0, distribution: InteractionDistribution::Fixed, ensemble_draws: 4, seed: 1 }
    }

    #[test]
    fn noiseless_signal_is_one() {
        for kind in [SequenceKind::Ramsey, SequenceKind::Hahn, SequenceKind::Cpmg, SequenceKind::Xy8, SequenceKind::Xy16, SequenceKind::XX] {
            let seq = SequenceSpec::tau_sweep(kind, 2, vec![100.0, 1000.0]);
            for pp in [PulseParams::ideal(), PulseParams { pi_duration_ns: 40.0, amplitude_error_sigma: 0.0 }] {
                let c = simulate_interacting_pairs(&quiet(), &pp, &seq).unwrap();
                assert!(c.signal.iter().all(|s| (s - 1.0).abs() < 1e-10), "{kind:?} {:?}", c.signal);
            }
        }
    }

    #[test]
    fn propagators_are_unitary() {
        let seq = SequenceSpec::tau_sweep(SequenceKind::Xy8, 16, vec![50.0, 5000.0]);
        let pp = PulseParams { pi_duration_ns: 40.0, amplitude_error_sigma: 0.1 };
        for d in 0..5 {
            assert!(unitarity_defect(&NoiseModel::reference(), &pp, &seq, d) < 1e-10);
        }
    }

    #[test]
    fn dipolar_coupling_has_requested_std() {
        let n = NoiseModel { ensemble_draws: 1, ..NoiseModel::reference() };
        let vs: Vec<f64> = (0..20000).map(|i| PairDraw::sample(&n, &PulseParams::ideal(), i).v).collect();
        let m = vs.iter().sum::<f64>() / vs.len() as f64;
        let sd = (vs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vs.len() as f64).sqrt();
        assert!((sd / (n.interaction_scale * 1e-6) - 1.0).abs() < 0.03);
        assert!(m.abs() < 0.03 * sd);
    }

    #[test]
    fn rejects_spin1_sequences() {
        let seq = SequenceSpec::tau_sweep(SequenceKind::DqRamsey, 1, vec![100.0]);
        assert!(simulate_interacting_pairs(&quiet(), &PulseParams::ideal(), &seq).is_err());
    }
}
