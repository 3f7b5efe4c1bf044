use nvdephase::fitkit::{fit_decay, FitModel};
use nvdephase::pulsesim::{
    log_grid, max_batch_deviation, mc_statistics, simulate_interacting_pairs, simulate_single_spin_ensemble,
    sequence_duration_us, unitarity_defect, NoiseModel, PulseParams, SequenceKind, SequenceSpec, SingleSpinNoise,
};

fn ramsey_grid() -> Vec<f64> {
    log_grid(20.0, 2000.0, 30)
}

fn single(kind: SequenceKind, delta: f64, a: f64, n: u32) -> Vec<f64> {
    let noise = SingleSpinNoise { delta_sigma: delta, a_sigma: a, seed: 3 };
    let seq = SequenceSpec::tau_sweep(kind, n, ramsey_grid());
    simulate_single_spin_ensemble(&noise, &seq, 4000).unwrap().signal
}

fn gaussian_rate(kind: SequenceKind, delta: f64, a: f64) -> f64 {
    let noise = SingleSpinNoise { delta_sigma: delta, a_sigma: a, seed: 3 };
    let seq = SequenceSpec::tau_sweep(kind, 1, ramsey_grid());
    let c = simulate_single_spin_ensemble(&noise, &seq, 4000).unwrap();
    let end = c.signal.iter().position(|s| *s < 0.05).unwrap_or(c.len());
    let w = nvdephase::DecayCurve::unweighted(c.t[..end].to_vec(), c.signal[..end].to_vec()).unwrap();
    fit_decay(&w, FitModel::GaussianDecay, None).unwrap().rate_khz
}

#[test]
fn double_quantum_ramsey_decays_twice_as_fast_under_linear_noise() {
    let sq = gaussian_rate(SequenceKind::Ramsey, 0.0, 0.5);
    let dq = gaussian_rate(SequenceKind::DqRamsey, 0.0, 0.5);
    let r = dq / sq;
    assert!((r - 2.0).abs() < 0.1, "ratio {r}");
}

#[test]
fn double_quantum_ramsey_ignores_quadratic_noise() {
    for s in single(SequenceKind::DqRamsey, 0.8, 0.0, 1) {
        assert!((s - 1.0).abs() < 1e-12);
    }
}

#[test]
fn strain_cpmg_refocuses_linear_noise_but_not_quadratic() {
    for s in single(SequenceKind::StrainCpmg, 0.0, 0.8, 4) {
        assert!((s - 1.0).abs() < 1e-12);
    }
    let hit = single(SequenceKind::StrainCpmg, 0.8, 0.0, 4);
    let ramsey = single(SequenceKind::Ramsey, 0.8, 0.0, 1);
    // Same total time per point: the quadratic phase is untouched by ±1 swaps.
    let seq = SequenceSpec::tau_sweep(SequenceKind::StrainCpmg, 4, ramsey_grid());
    let totals: Vec<f64> = ramsey_grid().iter().map(|t| seq.free_time_us(*t, 4) * 1e3).collect();
    let noise = SingleSpinNoise { delta_sigma: 0.8, a_sigma: 0.0, seed: 3 };
    let direct = simulate_single_spin_ensemble(&noise, &SequenceSpec::tau_sweep(SequenceKind::Ramsey, 1, totals), 4000)
        .unwrap()
        .signal;
    for (a, b) in hit.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(ramsey.last().unwrap().abs() < 0.05);
}

#[test]
fn echo_refocuses_static_single_spin_noise() {
    for kind in [SequenceKind::Hahn, SequenceKind::Cpmg, SequenceKind::Xy8] {
        for s in single(kind, 0.0, 0.8, 2) {
            assert!((s - 1.0).abs() < 1e-12, "{kind:?}");
        }
    }
}

fn small_noise(draws: usize, seed: u64) -> NoiseModel {
    NoiseModel { ensemble_draws: draws, seed, ..NoiseModel::reference() }
}

fn xy8() -> SequenceSpec {
    SequenceSpec::tau_sweep(SequenceKind::Xy8, 2, log_grid(100.0, 4000.0, 12))
}

#[test]
fn pair_simulation_is_deterministic_for_fixed_seed() {
    let p = PulseParams { pi_duration_ns: 40.0, amplitude_error_sigma: 0.1 };
    let a = simulate_interacting_pairs(&small_noise(200, 9), &p, &xy8()).unwrap();
    let b = simulate_interacting_pairs(&small_noise(200, 9), &p, &xy8()).unwrap();
    assert_eq!(a.signal, b.signal);
    assert_eq!(a.sigma, b.sigma);
}

#[test]
fn independent_batches_agree_within_statistics() {
    let p = PulseParams { pi_duration_ns: 40.0, amplitude_error_sigma: 0.1 };
    let stats = |seed| {
        let c = simulate_interacting_pairs(&small_noise(400, seed), &p, &xy8()).unwrap();
        nvdephase::pulsesim::McStats { mean: c.signal, stderr: c.sigma, draws: 400 }
    };
    let dev = max_batch_deviation(&stats(1), &stats(2));
    assert!(dev < 5.0, "batch deviation {dev} sigma");
}

#[test]
fn standard_error_scales_as_inverse_root_draws() {
    let p = PulseParams::ideal();
    let a = simulate_interacting_pairs(&small_noise(250, 4), &p, &xy8()).unwrap();
    let b = simulate_interacting_pairs(&small_noise(1000, 4), &p, &xy8()).unwrap();
    let ra: f64 = a.sigma.iter().sum();
    let rb: f64 = b.sigma.iter().sum();
    let r = ra / rb;
    assert!((r - 2.0).abs() < 0.3, "stderr ratio {r}");
}

#[test]
fn mc_statistics_of_constant_traces_has_zero_spread() {
    let s = mc_statistics(&vec![vec![0.3, 0.7]; 17]).unwrap();
    assert_eq!(s.stderr, vec![0.0, 0.0]);
    assert!(mc_statistics(&[vec![1.0]]).is_err());
}

#[test]
fn decoupling_without_interactions_leaves_signal_flat() {
    let noise = NoiseModel { interaction_scale: 0.0, ..small_noise(100, 5) };
    for kind in [SequenceKind::Hahn, SequenceKind::Cpmg, SequenceKind::Xy8, SequenceKind::Xy16] {
        let seq = SequenceSpec::tau_sweep(kind, 2, log_grid(100.0, 4000.0, 10));
        for s in simulate_interacting_pairs(&noise, &PulseParams::ideal(), &seq).unwrap().signal {
            assert!((s - 1.0).abs() < 1e-9, "{kind:?}: {s}");
        }
    }
}

#[test]
fn global_pi_pulses_commute_with_the_pair_coupling() {
    let noise = NoiseModel { disorder_sigma: 0.0, ..small_noise(100, 6) };
    for kind in [SequenceKind::Hahn, SequenceKind::Cpmg, SequenceKind::Xy8] {
        let seq = SequenceSpec::tau_sweep(kind, 2, log_grid(100.0, 4000.0, 10));
        let pulsed = simulate_interacting_pairs(&noise, &PulseParams::ideal(), &seq).unwrap();
        let totals: Vec<f64> = seq.points().iter().map(|(t, n)| seq.free_time_us(*t, *n) * 1e3).collect();
        let ramsey =
            simulate_interacting_pairs(&noise, &PulseParams::ideal(), &SequenceSpec::tau_sweep(SequenceKind::Ramsey, 1, totals))
                .unwrap();
        for (a, b) in pulsed.signal.iter().zip(&ramsey.signal) {
            assert!((a - b).abs() < 1e-9, "{kind:?}: {a} vs {b}");
        }
    }
}

#[test]
fn short_finite_pulses_approach_the_ideal_limit() {
    let noise = small_noise(100, 7);
    let ideal = simulate_interacting_pairs(&noise, &PulseParams::ideal(), &xy8()).unwrap();
    let short = simulate_interacting_pairs(&noise, &PulseParams { pi_duration_ns: 0.01, amplitude_error_sigma: 0.0 }, &xy8())
        .unwrap();
    for (a, b) in ideal.signal.iter().zip(&short.signal) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn propagators_stay_unitary_and_durations_add_up() {
    let p = PulseParams { pi_duration_ns: 40.0, amplitude_error_sigma: 0.1 };
    let seq = xy8();
    for d in 0..20 {
        assert!(unitarity_defect(&small_noise(20, 8), &p, &seq, d) < 1e-10);
    }
    let t = sequence_duration_us(&seq, &p, 200.0, 2);
    assert!((t - (16.0 * 0.2 + 16.0 * 0.04 + 2.0 * 0.02)).abs() < 0.05, "{t}");
}

#[test]
fn unsupported_sequences_are_rejected() {
    let seq = SequenceSpec::tau_sweep(SequenceKind::DqRamsey, 1, vec![100.0]);
    assert!(simulate_interacting_pairs(&small_noise(10, 1), &PulseParams::ideal(), &seq).is_err());
    let bad = SequenceSpec::tau_sweep(SequenceKind::Xy8, 1, vec![-1.0]);
    assert!(simulate_interacting_pairs(&small_noise(10, 1), &PulseParams::ideal(), &bad).is_err());
    assert!(SequenceKind::parse("nope").is_err());
}
