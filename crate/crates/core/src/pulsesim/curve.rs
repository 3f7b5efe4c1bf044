use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time series of a normalized coherence with per-point standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    /// µs
    pub t: Vec<f64>,
    pub signal: Vec<f64>,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl DecayCurve {
    pub fn new(t: Vec<f64>, signal: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let c = Self { t, signal, sigma, metadata: BTreeMap::new() };
        c.validate()?;
        Ok(c)
    }

    /// Curve without uncertainties (σ = 0 means unweighted).
    pub fn unweighted(t: Vec<f64>, signal: Vec<f64>) -> Result<Self> {
        let n = t.len();
        Self::new(t, signal, vec![0.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if self.signal.len() != n || self.sigma.len() != n {
            return Err(Error::InvalidInput("t, signal and sigma lengths differ".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("empty curve".into()));
        }
        if self.t.iter().chain(&self.signal).chain(&self.sigma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite curve value".into()));
        }
        if self.t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("t must be strictly increasing".into()));
        }
        if self.sigma.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidInput("negative sigma".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }
}
