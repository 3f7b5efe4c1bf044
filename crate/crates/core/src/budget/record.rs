use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A measured rate in kHz with optional 1σ error and stretch exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rate {
    pub value: f64,
    #[serde(default)]
    pub err: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stretch: Option<f64>,
}

impl Rate {
    pub fn new(value: f64) -> Self {
        Self { value, err: 0.0, stretch: None }
    }

    pub fn with_err(value: f64, err: f64) -> Self {
        Self { value, err, stretch: None }
    }

    fn scaled(self, a: f64) -> Self {
        Self { value: self.value * a, err: self.err * a.abs(), stretch: self.stretch }
    }
}

/// One sample's measured rates and growth data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub name: String,
    /// Ramsey rate from a single-exponential fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2star: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2star_stretched: Option<Rate>,
    /// Hahn-echo rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma2_stretched: Option<Rate>,
    /// Half the double-quantum Ramsey rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_dq_half: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_strain_cpmg: Option<Rate>,
    /// Zero-field ODMR dip width ν, kHz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_zf_odmr: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_p1_deer: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_nvoff_deer: Option<Rate>,
    /// XY8-N asymptote.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_nvnv: Option<Rate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c13_abundance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_gauss: Option<f64>,
    /// e/cm²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dose_e_per_cm2: Option<f64>,
    /// ppm
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_n_ppm: Option<f64>,
}

impl SampleRecord {
    pub fn named(name: &str) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    fn rates(&self) -> [(&'static str, Option<Rate>); 10] {
        [
            ("gamma2star", self.gamma2star),
            ("gamma2star_stretched", self.gamma2star_stretched),
            ("gamma2", self.gamma2),
            ("gamma2_stretched", self.gamma2_stretched),
            ("gamma_dq_half", self.gamma_dq_half),
            ("gamma_strain_cpmg", self.gamma_strain_cpmg),
            ("nu_zf_odmr", self.nu_zf_odmr),
            ("gamma_p1_deer", self.gamma_p1_deer),
            ("gamma_nvoff_deer", self.gamma_nvoff_deer),
            ("gamma_nvnv", self.gamma_nvnv),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (field, r) in self.rates() {
            if let Some(r) = r {
                if !(r.value >= 0.0) || !r.value.is_finite() || !(r.err >= 0.0) {
                    return Err(Error::InvalidInput(format!("{}: {field} must be a finite rate >= 0", self.name)));
                }
                if let Some(p) = r.stretch {
                    if !(p > 0.0) {
                        return Err(Error::InvalidInput(format!("{}: {field}.stretch must be > 0", self.name)));
                    }
                }
            }
        }
        if let Some(a) = self.c13_abundance {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidInput(format!("{}: c13_abundance must be in [0, 1]", self.name)));
            }
        }
        for (field, v) in [("dose_e_per_cm2", self.dose_e_per_cm2), ("initial_n_ppm", self.initial_n_ppm)] {
            if v.is_some_and(|x| !(x >= 0.0)) {
                return Err(Error::InvalidInput(format!("{}: {field} must be >= 0", self.name)));
            }
        }
        Ok(())
    }

    /// Every measured rate multiplied by `a`; abundance and growth data untouched.
    pub fn scale_rates(&self, a: f64) -> Self {
        let s = |r: Option<Rate>| r.map(|r| r.scaled(a));
        Self {
            gamma2star: s(self.gamma2star),
            gamma2star_stretched: s(self.gamma2star_stretched),
            gamma2: s(self.gamma2),
            gamma2_stretched: s(self.gamma2_stretched),
            gamma_dq_half: s(self.gamma_dq_half),
            gamma_strain_cpmg: s(self.gamma_strain_cpmg),
            nu_zf_odmr: s(self.nu_zf_odmr),
            gamma_p1_deer: s(self.gamma_p1_deer),
            gamma_nvoff_deer: s(self.gamma_nvoff_deer),
            gamma_nvnv: s(self.gamma_nvnv),
            ..self.clone()
        }
    }

    /// Fills growth data from another record set by name.
    pub fn merge_growth(&mut self, other: &SampleRecord) {
        self.dose_e_per_cm2 = self.dose_e_per_cm2.or(other.dose_e_per_cm2);
        self.initial_n_ppm = self.initial_n_ppm.or(other.initial_n_ppm);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSet {
    #[serde(rename = "_provenance", default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default = "one")]
    pub version: u32,
    pub samples: Vec<SampleRecord>,
}

fn one() -> u32 {
    1
}

impl SampleSet {
    pub fn from_json(s: &str) -> Result<Self> {
        let set: SampleSet = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("sample JSON: {e}")))?;
        if set.samples.is_empty() {
            return Err(Error::InvalidInput("sample JSON: no samples".into()));
        }
        for r in &set.samples {
            r.validate()?;
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|r| r.name == name)
    }
}

const RATES: &str = include_str!("../../data/samples_rates.json");
const GROWTH: &str = include_str!("../../data/samples_growth.json");

/// Bundled measured rates for the eleven reference samples.
pub fn bundled_rates() -> SampleSet {
    SampleSet::from_json(RATES).expect("bundled rate fixture is valid")
}

/// Bundled irradiation doses and initial nitrogen.
pub fn bundled_growth() -> SampleSet {
    SampleSet::from_json(GROWTH).expect("bundled growth fixture is valid")
}

/// Rates merged with growth data.
pub fn bundled_samples() -> Vec<SampleRecord> {
    let growth = bundled_growth();
    bundled_rates()
        .samples
        .into_iter()
        .map(|mut r| {
            if let Some(g) = growth.get(&r.name) {
                r.merge_growth(g);
            }
            r
        })
        .collect()
}
