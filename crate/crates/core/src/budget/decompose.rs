use serde::{Deserialize, Serialize};

use super::{ConversionFactors, Rate, SampleRecord};
use crate::error::{Error, Result};

/// A budget entry in kHz with first-order propagated 1σ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub value: f64,
    pub err: f64,
}

impl Term {
    fn of(r: Rate) -> Self {
        Self { value: r.value, err: r.err }
    }

    fn scale(self, a: f64) -> Self {
        Self { value: self.value * a, err: self.err * a.abs() }
    }

    fn sub(self, o: Term) -> Self {
        Self { value: self.value - o.value, err: self.err.hypot(o.err) }
    }

    fn add(self, o: Term) -> Self {
        Self { value: self.value + o.value, err: self.err.hypot(o.err) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingBudget {
    pub sample: String,
    /// Γ_strainCPMG − Γ₂
    pub sz2: Option<Term>,
    pub strain: Option<Term>,
    pub elec: Option<Term>,
    pub c13: Option<Term>,
    pub c13_scaled: Option<Term>,
    pub p1: Option<Term>,
    pub nvnv: Option<Term>,
    pub gamma1: Term,
    /// Γ₂* minus every identified term.
    pub other: Option<Term>,
    /// Γ₂* / (Γ_DQ/2 + Γ_Sz²)
    pub consistency_ratio: Option<Term>,
    pub within_band: Option<bool>,
    pub flags: Vec<String>,
}

impl DephasingBudget {
    /// Named terms that are present, in reporting order.
    pub fn terms(&self) -> Vec<(&'static str, Term)> {
        [
            ("sz2", self.sz2),
            ("strain", self.strain),
            ("elec", self.elec),
            ("c13", self.c13),
            ("c13_scaled", self.c13_scaled),
            ("p1", self.p1),
            ("nvnv", self.nvnv),
            ("gamma1", Some(self.gamma1)),
            ("other", self.other),
        ]
        .into_iter()
        .filter_map(|(n, t)| t.map(|t| (n, t)))
        .collect()
    }
}

fn non_negative(t: Term, what: &str, flags: &mut Vec<String>) -> Term {
    if t.value < 0.0 {
        flags.push(format!("{what} negative ({:.3} kHz), clamped to 0", t.value));
        Term { value: 0.0, err: t.err }
    } else {
        t
    }
}

/// Splits Γ₂* into strain, electric, ¹³C, P1, NV-NV and T₁ terms.
pub fn decompose(rec: &SampleRecord, f: &ConversionFactors) -> Result<DephasingBudget> {
    rec.validate()?;
    f.validate()?;
    let mut flags = Vec::new();
    let t = |r: Option<Rate>| r.map(Term::of);

    let sz2 = match (t(rec.gamma_strain_cpmg), t(rec.gamma2)) {
        (Some(c), Some(g2)) => Some(non_negative(c.sub(g2), "S_z^2 rate", &mut flags)),
        (Some(_), None) => {
            flags.push("gamma2 missing: S_z^2 term unavailable".into());
            None
        }
        (None, _) => {
            flags.push("strain-CPMG rate missing: strain split unavailable".into());
            None
        }
    };
    let elec = t(rec.nu_zf_odmr).map(|nu| nu.scale(f.d_parallel / f.d_perpendicular));
    if elec.is_none() {
        flags.push("zero-field dip width missing: electric term unavailable".into());
    }
    let strain = match (sz2, elec) {
        (Some(s), Some(e)) => Some(non_negative(s.sub(e), "strain rate", &mut flags)),
        (Some(s), None) => {
            flags.push("strain term includes any electric contribution".into());
            Some(s)
        }
        _ => None,
    };
    // Abundance is a fraction; the factors are per ppm of ¹³C.
    let c13 = rec.c13_abundance.map(|a| Term { value: a * 1e6 * f.c13, err: 0.0 });
    let c13_scaled = rec.c13_abundance.map(|a| Term { value: a * 1e6 * f.c13_scaled, err: 0.0 });
    if c13.is_none() {
        flags.push("13C abundance missing".into());
    }
    let p1 = t(rec.gamma_p1_deer).map(|d| d.scale(f.p1_total_over_deer));
    if p1.is_none() {
        flags.push("P1 DEER rate missing".into());
    }
    let nvnv = t(rec.gamma_nvnv);
    let g2s = t(rec.gamma2star);
    // T₁ cannot account for more than the total dephasing.
    let gamma1 = Term { value: f.gamma1_khz().min(g2s.map_or(f.gamma1_khz(), |g| g.value)), err: 0.0 };

    let other = g2s.map(|g| {
        [strain, elec, c13, p1, nvnv].into_iter().flatten().fold(g.sub(gamma1), |acc, x| acc.sub(x))
    });
    if let Some(o) = other {
        if o.value + 2.0 * o.err < 0.0 {
            flags.push(format!("identified terms exceed Γ2* by {:.2} kHz", -o.value));
        }
    } else {
        flags.push("gamma2star missing: no remainder".into());
    }

    let consistency_ratio = match (g2s, t(rec.gamma_dq_half), sz2) {
        (Some(g), Some(dq), Some(s)) => {
            let den = dq.add(s);
            (den.value > 0.0).then(|| {
                let r = g.value / den.value;
                let rel = (g.err / g.value.max(1e-300)).hypot(den.err / den.value);
                Term { value: r, err: r * rel }
            })
        }
        _ => None,
    };
    let within_band = consistency_ratio.map(|r| (r.value - 1.0).abs() <= f.consistency_band + 1e-12);

    Ok(DephasingBudget {
        sample: rec.name.clone(),
        sz2,
        strain,
        elec,
        c13,
        c13_scaled,
        p1,
        nvnv,
        gamma1,
        other,
        consistency_ratio,
        within_band,
        flags,
    })
}

/// A density estimate in ppm with its source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub ppm: f64,
    pub err: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concentrations {
    /// From the XY8 asymptote.
    pub n_nv: Option<Estimate>,
    /// From off-axis NV DEER.
    pub n_nv_deer: Option<Estimate>,
    pub n_p1: Option<Estimate>,
    /// From the zero-field dip width, (ν / 0.56 MHz)^(3/2).
    pub n_charge: Option<Estimate>,
    /// NV-NV rate below the T₁-limited floor of 0.1 kHz.
    pub below_detection: bool,
    /// Upper bound in ppm when below detection.
    pub n_nv_upper: Option<f64>,
    /// NV estimates spread by more than a factor of 3.
    pub inconsistent: bool,
}

/// Smallest NV-NV rate distinguishable from T₁ relaxation, kHz.
pub const NVNV_DETECTION_FLOOR: f64 = 0.1;

pub fn estimate_concentrations(rec: &SampleRecord, f: &ConversionFactors) -> Result<Concentrations> {
    rec.validate()?;
    f.validate()?;
    if rec.gamma_nvnv.is_none() && rec.gamma_nvoff_deer.is_none() && rec.nu_zf_odmr.is_none() {
        return Err(Error::InsufficientData(format!(
            "{}: need gamma_nvnv, gamma_nvoff_deer or nu_zf_odmr",
            rec.name
        )));
    }
    let lin = |r: Rate, k: f64, m: &str| Estimate { ppm: r.value / k, err: r.err / k, method: m.into() };
    let mut below = false;
    let mut upper = None;
    let n_nv = match rec.gamma_nvnv {
        Some(r) if r.value < NVNV_DETECTION_FLOOR => {
            below = true;
            upper = Some(NVNV_DETECTION_FLOOR / f.nvnv);
            None
        }
        Some(r) => Some(lin(r, f.nvnv, "xy8 asymptote")),
        None => None,
    };
    let n_nv_deer = rec.gamma_nvoff_deer.map(|r| lin(r, f.nv_off_deer, "off-axis NV DEER"));
    let n_p1 = rec.gamma_p1_deer.map(|r| lin(r, f.p1_deer, "P1 DEER"));
    let n_charge = rec.nu_zf_odmr.map(|r| {
        let x = r.value * 1e-3 / f.charge_zf;
        let ppm = x.powf(1.5);
        let err = if r.value > 0.0 { 1.5 * ppm * r.err / r.value } else { 0.0 };
        Estimate { ppm, err, method: "zero-field dip width".into() }
    });
    let vals: Vec<f64> = [&n_nv, &n_nv_deer].iter().filter_map(|e| e.as_ref().map(|e| e.ppm)).filter(|v| *v > 0.0).collect();
    let inconsistent = vals.len() >= 2 && {
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max / min > 3.0
    };
    Ok(Concentrations { n_nv, n_nv_deer, n_p1, n_charge, below_detection: below, n_nv_upper: upper, inconsistent })
}

/// Inputs besides n_NV for the strain-free Γ₂* projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalContext {
    pub c13_abundance: f64,
    /// P1 density per ppm NV.
    pub p1_per_nv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalBreakdown {
    pub c13: f64,
    pub p1: f64,
    /// NV-NV plus off-axis NV, linear in density.
    pub nv: f64,
    pub elec: f64,
    pub total: f64,
}

/// Γ₂* with strain removed: dipolar terms linear in density, electric term ∝ n^(2/3).
pub fn optimal_gamma2star(n_nv: f64, ctx: &OptimalContext, f: &ConversionFactors) -> Result<OptimalBreakdown> {
    if !(n_nv > 0.0) {
        return Err(Error::InvalidInput("n_NV must be > 0".into()));
    }
    let c13 = ctx.c13_abundance * 1e6 * f.c13;
    let p1 = ctx.p1_per_nv * n_nv * f.p1_deer * f.p1_total_over_deer;
    let nv = n_nv * (f.nvnv + f.nv_off_deer);
    let elec = f.elec_vs_nv * n_nv.powf(2.0 / 3.0) * f.d_parallel / f.d_perpendicular;
    Ok(OptimalBreakdown { c13, p1, nv, elec, total: c13 + p1 + nv + elec })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionRow {
    pub name: String,
    /// ppm per kHz
    pub nv_over_gamma2: f64,
    /// 1e17 e/cm² per ppm
    pub dose_over_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionFit {
    pub rows: Vec<ConversionRow>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Correlates NV density per Γ₂ with irradiation dose per initial nitrogen.
pub fn conversion_analysis(records: &[SampleRecord], f: &ConversionFactors) -> Result<ConversionFit> {
    let rows: Vec<ConversionRow> = records
        .iter()
        .filter_map(|r| {
            let n = r.gamma_nvnv?.value / f.nvnv;
            let g2 = r.gamma2?.value;
            let dose = r.dose_e_per_cm2?;
            let n0 = r.initial_n_ppm?;
            (g2 > 0.0 && n0 > 0.0).then(|| ConversionRow { name: r.name.clone(), nv_over_gamma2: n / g2, dose_over_n: dose / 1e17 / n0 })
        })
        .collect();
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!("{} usable records, need at least 3", rows.len())));
    }
    let k = rows.len() as f64;
    let mx = rows.iter().map(|r| r.dose_over_n).sum::<f64>() / k;
    let my = rows.iter().map(|r| r.nv_over_gamma2).sum::<f64>() / k;
    let sxx: f64 = rows.iter().map(|r| (r.dose_over_n - mx).powi(2)).sum();
    let syy: f64 = rows.iter().map(|r| (r.nv_over_gamma2 - my).powi(2)).sum();
    let sxy: f64 = rows.iter().map(|r| (r.dose_over_n - mx) * (r.nv_over_gamma2 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Singular("all dose ratios identical".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(ConversionFit { intercept: my - slope * mx, slope, r_squared, rows })
}
