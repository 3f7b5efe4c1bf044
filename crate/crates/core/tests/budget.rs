use approx::assert_relative_eq;
use nvdephase::budget::{
    bundled_rates, bundled_samples, conversion_analysis, cw_point, decompose, estimate_concentrations, optimal_gamma2star,
    sensitivity_cwodmr, sensitivity_ramsey, CwParams, OptimalContext, Rate, RamseyParams, SampleRecord, SampleSet,
    NVNV_DETECTION_FLOOR,
};
use nvdephase::ConversionFactors;
use proptest::prelude::*;

fn h2() -> SampleRecord {
    bundled_rates().get("H2").unwrap().clone()
}

#[test]
fn h2_budget_reproduces_the_strain_and_electric_split() {
    let b = decompose(&h2(), &ConversionFactors::default()).unwrap();
    assert_relative_eq!(b.elec.unwrap().value, 4.53, epsilon = 0.01);
    assert_relative_eq!(b.strain.unwrap().value, 45.47, epsilon = 0.01);
    assert_relative_eq!(b.sz2.unwrap().value, 50.0, epsilon = 1e-9);
    assert_relative_eq!(b.p1.unwrap().value, 3.4 * 6.0, epsilon = 1e-9);
    assert!(b.within_band.unwrap());
}

#[test]
fn all_zero_record_gives_all_zero_budget() {
    let z = Rate::new(0.0);
    let rec = SampleRecord {
        gamma2star: Some(z),
        gamma2: Some(z),
        gamma_dq_half: Some(z),
        gamma_strain_cpmg: Some(z),
        nu_zf_odmr: Some(z),
        gamma_p1_deer: Some(z),
        gamma_nvnv: Some(z),
        c13_abundance: Some(0.0),
        ..SampleRecord::named("zero")
    };
    let b = decompose(&rec, &ConversionFactors::default()).unwrap();
    for (name, t) in b.terms() {
        assert_eq!(t.value, 0.0, "{name}");
    }
    assert!(b.consistency_ratio.is_none());
}

#[test]
fn consistency_ratio_flags_the_outliers() {
    let f = ConversionFactors::default();
    let outside: Vec<String> = bundled_samples()
        .iter()
        .filter_map(|r| {
            let b = decompose(r, &f).unwrap();
            (b.within_band == Some(false)).then(|| r.name.clone())
        })
        .collect();
    assert!(outside.contains(&"C3".to_string()), "{outside:?}");
    let inside = bundled_samples().iter().filter(|r| decompose(r, &f).unwrap().within_band == Some(true)).count();
    assert!(inside >= 8, "{inside}");
}

#[test]
fn missing_inputs_are_flagged_not_fatal() {
    let rec = SampleRecord { gamma2star: Some(Rate::new(50.0)), ..SampleRecord::named("sparse") };
    let b = decompose(&rec, &ConversionFactors::default()).unwrap();
    assert!(b.strain.is_none() && b.elec.is_none() && b.p1.is_none());
    assert!(b.flags.len() >= 3);
    let bad = SampleRecord { gamma2: Some(Rate::new(-1.0)), ..SampleRecord::named("bad") };
    assert!(decompose(&bad, &ConversionFactors::default()).is_err());
}

#[test]
fn h2_concentrations_from_three_probes() {
    let c = estimate_concentrations(&h2(), &ConversionFactors::default()).unwrap();
    assert_relative_eq!(c.n_nv.unwrap().ppm, 0.17, max_relative = 0.05);
    assert_relative_eq!(c.n_nv_deer.unwrap().ppm, 0.12, max_relative = 0.05);
    assert_relative_eq!(c.n_p1.unwrap().ppm, 0.26, max_relative = 0.05);
    assert!(!c.below_detection);
}

#[test]
fn tiny_nvnv_rate_reports_an_upper_bound() {
    let rec = SampleRecord { gamma_nvnv: Some(Rate::new(0.5 * NVNV_DETECTION_FLOOR)), ..SampleRecord::named("dilute") };
    let f = ConversionFactors::default();
    let c = estimate_concentrations(&rec, &f).unwrap();
    assert!(c.below_detection && c.n_nv.is_none());
    assert_relative_eq!(c.n_nv_upper.unwrap(), NVNV_DETECTION_FLOOR / f.nvnv);
    assert!(estimate_concentrations(&SampleRecord::named("empty"), &f).is_err());
}

#[test]
fn estimates_invert_the_rate_conversions() {
    let f = ConversionFactors::default();
    let n = 0.37;
    let rec = SampleRecord {
        gamma_nvnv: Some(Rate::new(n * f.nvnv)),
        gamma_nvoff_deer: Some(Rate::new(n * f.nv_off_deer)),
        gamma_p1_deer: Some(Rate::new(2.0 * n * f.p1_deer)),
        ..SampleRecord::named("synthetic")
    };
    let c = estimate_concentrations(&rec, &f).unwrap();
    assert_relative_eq!(c.n_nv.unwrap().ppm, n, epsilon = 1e-12);
    assert_relative_eq!(c.n_nv_deer.unwrap().ppm, n, epsilon = 1e-12);
    assert_relative_eq!(c.n_p1.unwrap().ppm, 2.0 * n, epsilon = 1e-12);
    assert!(!c.inconsistent);
}

#[test]
fn conversion_analysis_is_idempotent_and_needs_three_rows() {
    let f = ConversionFactors::default();
    let s = bundled_samples();
    let a = conversion_analysis(&s, &f).unwrap();
    let b = conversion_analysis(&s, &f).unwrap();
    assert_eq!(a, b);
    assert!(a.slope > 0.0 && (0.0..=1.0).contains(&a.r_squared));
    assert!(conversion_analysis(&s[..1], &f).is_err());
}

#[test]
fn optimal_projection_grows_with_density() {
    let f = ConversionFactors::default();
    let ctx = OptimalContext { c13_abundance: 1e-4, p1_per_nv: 2.0 };
    let mut last = 0.0;
    for n in [0.01, 0.1, 1.0, 10.0] {
        let o = optimal_gamma2star(n, &ctx, &f).unwrap();
        assert_relative_eq!(o.total, o.c13 + o.p1 + o.nv + o.elec, epsilon = 1e-12);
        assert!(o.total > last);
        last = o.total;
    }
    assert!(optimal_gamma2star(0.0, &ctx, &f).is_err());
}

#[test]
fn ramsey_sensitivity_scales_with_volume_and_optimum_sits_at_half_t2star() {
    let p = RamseyParams { gamma2star_khz: 100.0, ..Default::default() };
    let a = sensitivity_ramsey(&p).unwrap();
    let b = sensitivity_ramsey(&RamseyParams { volume_mm3: 2.0 * p.volume_mm3, ..p }).unwrap();
    assert_relative_eq!(a.eta_pt / b.eta_pt, 2f64.sqrt(), max_relative = 1e-6);
    assert_relative_eq!(a.tau_us, 0.5 * 1e3 / p.gamma2star_khz, max_relative = 1e-4);
}

#[test]
fn ramsey_sensitivity_worsens_monotonically_with_dephasing() {
    let mut last = 0.0;
    for g in [10.0, 30.0, 100.0, 300.0, 1000.0] {
        let s = sensitivity_ramsey(&RamseyParams { gamma2star_khz: g, ..Default::default() }).unwrap();
        assert!(s.eta_pt > last);
        last = s.eta_pt;
    }
    assert!(sensitivity_ramsey(&RamseyParams { contrast: 0.0, ..Default::default() }).is_err());
}

#[test]
fn cw_sensitivity_is_never_better_than_ramsey() {
    let f = ConversionFactors::default();
    for r in bundled_samples() {
        let Some(g) = r.gamma2star else { continue };
        let n = estimate_concentrations(&r, &f).ok().and_then(|c| c.n_nv.or(c.n_nv_deer)).map_or(0.1, |e| e.ppm.max(1e-3));
        let ram = sensitivity_ramsey(&RamseyParams { gamma2star_khz: g.value, n_nv_ppm: n, ..Default::default() }).unwrap();
        let (cw, _) = sensitivity_cwodmr(&CwParams { gamma2star_khz: g.value, n_nv_ppm: n, ..Default::default() }).unwrap();
        assert!(cw.eta_pt >= ram.eta_pt, "{}: cw {} ramsey {}", r.name, cw.eta_pt, ram.eta_pt);
    }
}

#[test]
fn cw_without_microwaves_has_no_contrast() {
    let p = cw_point(&CwParams::default(), 1.0, 0.0).unwrap();
    assert_eq!(p.contrast, 0.0);
    assert!(p.eta.is_infinite());
}

#[test]
fn sample_json_rejects_unknown_fields_and_empty_sets() {
    assert!(SampleSet::from_json(r#"{"samples":[{"name":"a","bogus":1}]}"#).is_err());
    assert!(SampleSet::from_json(r#"{"samples":[]}"#).is_err());
    let s = SampleSet::from_json(r#"{"samples":[{"name":"a","gamma2":{"value":3}}]}"#).unwrap();
    assert_eq!(s.get("a").unwrap().gamma2.unwrap().value, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn budget_terms_scale_linearly_with_the_rates(a in 0.1f64..10.0, idx in 0usize..11) {
        // T₁ and ¹³C are fixed by the factors and do not scale.
        let f = ConversionFactors { t1_ms: 1e12, ..Default::default() };
        let rec = bundled_samples()[idx].clone();
        let rec = SampleRecord { c13_abundance: None, ..rec };
        let b0 = decompose(&rec, &f).unwrap();
        let b1 = decompose(&rec.scale_rates(a), &f).unwrap();
        for ((n0, t0), (_, t1)) in b0.terms().iter().zip(b1.terms().iter()) {
            if *n0 == "gamma1" { continue; }
            prop_assert!((t1.value - a * t0.value).abs() <= 1e-9 * (1.0 + t0.value.abs() * a), "{}", n0);
        }
        if let (Some(r0), Some(r1)) = (b0.consistency_ratio, b1.consistency_ratio) {
            prop_assert!((r0.value - r1.value).abs() < 1e-9);
        }
    }
}
