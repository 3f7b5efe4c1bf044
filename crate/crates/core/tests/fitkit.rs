use nvdephase::fitkit::{fit_decay, fit_zero_field_odmr, model_select, synth_zero_field_odmr, FitModel, OdmrSynthParams};
use nvdephase::pulsesim::log_grid;
use nvdephase::{DecayCurve, PhysicalConstants};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn synth(rate_khz: f64, p: f64, amp: f64, noise: f64, seed: u64) -> DecayCurve {
    let t = log_grid(0.05 / (rate_khz * 1e-3), 4.0 / (rate_khz * 1e-3), 60);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let y = t.iter().map(|x| amp * (-(rate_khz * 1e-3 * x).powf(p)).exp() + if noise > 0.0 { n.sample(&mut rng) } else { 0.0 }).collect();
    let s = vec![noise; t.len()];
    if noise > 0.0 { DecayCurve::new(t, y, s).unwrap() } else { DecayCurve::unweighted(t, y).unwrap() }
}

#[test]
fn noiseless_round_trip_over_decades_of_rate() {
    for rate in [0.1, 1.0, 10.0, 100.0, 1000.0, 1e4] {
        for p in [0.5, 1.0, 1.5, 2.0] {
            let f = fit_decay(&synth(rate, p, 0.9, 0.0, 0), FitModel::StretchedExp, None).unwrap();
            assert!((f.rate_khz / rate - 1.0).abs() < 1e-4, "rate {rate} p {p}: {}", f.rate_khz);
            assert!((f.stretch - p).abs() < 1e-4);
            assert!((f.amplitude - 0.9).abs() < 1e-4);
        }
    }
}

#[test]
fn reported_errors_cover_the_truth() {
    // Pull distribution over independent noise draws should have unit width.
    let pulls: Vec<f64> = (0..200)
        .map(|s| {
            let f = fit_decay(&synth(50.0, 1.0, 1.0, 0.01, s), FitModel::Exp, None).unwrap();
            (f.rate_khz - 50.0) / f.errors.rate_khz
        })
        .collect();
    let m = pulls.iter().sum::<f64>() / pulls.len() as f64;
    let sd = (pulls.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (pulls.len() - 1) as f64).sqrt();
    assert!(m.abs() < 0.3, "pull mean {m}");
    assert!((sd - 1.0).abs() < 0.2, "pull width {sd}");
}

#[test]
fn model_selection_recognizes_clean_shapes() {
    // One extra parameter buys a stretched fit the same data about 1 in 6 times by chance.
    for (p, want) in [(1.0, FitModel::Exp), (2.0, FitModel::GaussianDecay), (0.6, FitModel::StretchedExp)] {
        let hits = (0..30).filter(|s| model_select(&synth(20.0, p, 1.0, 0.002, *s)).unwrap().model == want).count();
        assert!(hits >= 21, "p = {p}: {hits}/30 chose {want:?}");
    }
}

#[test]
fn too_few_points_are_rejected() {
    let c = DecayCurve::unweighted(vec![1.0, 2.0, 3.0], vec![1.0, 0.5, 0.25]).unwrap();
    assert!(fit_decay(&c, FitModel::Exp, None).is_err());
    assert!(DecayCurve::unweighted(vec![1.0, f64::NAN], vec![1.0, 0.5]).is_err());
    assert!(FitModel::parse("cubic").is_err());
}

#[test]
fn zero_field_dip_width_tracks_the_field_spread() {
    let k = PhysicalConstants::default();
    for nu in [100.0, 220.0, 500.0] {
        let p = OdmrSynthParams { sigma_e: nu * 1e3 / k.d_perpendicular, ..Default::default() };
        let f = fit_zero_field_odmr(&synth_zero_field_odmr(&p, &k).unwrap(), &k).unwrap();
        assert!((f.nu_dip_khz / nu - 1.0).abs() < 0.1, "{nu}: {}", f.nu_dip_khz);
        assert!((f.gamma_elec_khz - f.nu_dip_khz * 0.35 / 17.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn noisy_stretched_fits_recover_parameters(rate in 1.0f64..500.0, p in 0.6f64..2.5, seed in any::<u64>()) {
        let f = fit_decay(&synth(rate, p, 1.0, 0.005, seed), FitModel::StretchedExp, None).unwrap();
        prop_assert!((f.rate_khz / rate - 1.0).abs() < 0.05, "{} vs {}", f.rate_khz, rate);
        prop_assert!((f.stretch - p).abs() < 0.15 * p);
    }
}
