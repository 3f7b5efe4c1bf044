use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Ramsey,
    DqRamsey,
    Hahn,
    Cpmg,
    Xy8,
    Xy16,
    /// Alternating +x / −x π pulses. Experimental.
    XX,
    StrainCpmg,
    DeerPulseSweep,
    DeerDurationSweep,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 10] = [
        SequenceKind::Ramsey,
        SequenceKind::DqRamsey,
        SequenceKind::Hahn,
        SequenceKind::Cpmg,
        SequenceKind::Xy8,
        SequenceKind::Xy16,
        SequenceKind::XX,
        SequenceKind::StrainCpmg,
        SequenceKind::DeerPulseSweep,
        SequenceKind::DeerDurationSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Ramsey => "ramsey",
            SequenceKind::DqRamsey => "dq-ramsey",
            SequenceKind::Hahn => "hahn",
            SequenceKind::Cpmg => "cpmg",
            SequenceKind::Xy8 => "xy8",
            SequenceKind::Xy16 => "xy16",
            SequenceKind::XX => "x-x",
            SequenceKind::StrainCpmg => "strain-cpmg",
            SequenceKind::DeerPulseSweep => "deer-pulse-sweep",
            SequenceKind::DeerDurationSweep => "deer-duration-sweep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sequence '{s}'")))
    }

    /// Pulse phases (radians) of one repetition unit, or None for free evolution.
    pub(crate) fn phases(self) -> Option<Vec<f64>> {
        use std::f64::consts::{FRAC_PI_2, PI};
        const X: f64 = 0.0;
        const Y: f64 = FRAC_PI_2;
        let xy8 = vec![X, Y, X, Y, Y, X, Y, X];
        match self {
            SequenceKind::Ramsey | SequenceKind::DqRamsey => None,
            SequenceKind::Hahn | SequenceKind::Cpmg | SequenceKind::StrainCpmg => Some(vec![Y]),
            SequenceKind::Xy8 => Some(xy8),
            SequenceKind::Xy16 => {
                let mut v = xy8.clone();
                v.extend(xy8.iter().map(|p| p + PI));
                Some(v)
            }
            SequenceKind::XX => Some(vec![X, X + PI]),
            SequenceKind::DeerPulseSweep | SequenceKind::DeerDurationSweep => None,
        }
    }

    pub fn is_deer(self) -> bool {
        matches!(self, SequenceKind::DeerPulseSweep | SequenceKind::DeerDurationSweep)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Inter-pulse spacings in ns at the spec's fixed N.
    TauFixedN(Vec<f64>),
    /// Repetition counts at the spec's fixed τ.
    NFixedTau(Vec<u32>),
}

/// A pulse sequence and the grid it is swept over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    /// ns; for Ramsey-type sequences the free evolution time.
    pub tau_ns: f64,
    pub n: u32,
    pub sweep: Sweep,
}

/// 40 log-spaced spacings from 50 ns to 20 µs.
pub fn default_tau_grid() -> Vec<f64> {
    log_grid(50.0, 20_000.0, 40)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl SequenceSpec {
    pub fn tau_sweep(kind: SequenceKind, n: u32, tau_ns: Vec<f64>) -> Self {
        let first = tau_ns.first().copied().unwrap_or(0.0);
        Self { kind, tau_ns: first, n, sweep: Sweep::TauFixedN(tau_ns) }
    }

    pub fn n_sweep(kind: SequenceKind, tau_ns: f64, n: Vec<u32>) -> Self {
        let first = n.first().copied().unwrap_or(0);
        Self { kind, tau_ns, n: first, sweep: Sweep::NFixedTau(n) }
    }

    pub fn validate(&self) -> Result<()> {
        let pts = self.points();
        if pts.is_empty() {
            return Err(Error::InvalidInput("empty sweep".into()));
        }
        for (tau, n) in pts {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidInput(format!("tau must be > 0, got {tau}")));
            }
            if n < 1 {
                return Err(Error::InvalidInput("N must be >= 1".into()));
            }
        }
        Ok(())
    }

    /// (τ ns, N) for every sweep point.
    pub fn points(&self) -> Vec<(f64, u32)> {
        match &self.sweep {
            Sweep::TauFixedN(t) => t.iter().map(|&x| (x, self.n)).collect(),
            Sweep::NFixedTau(ns) => ns.iter().map(|&n| (self.tau_ns, n)).collect(),
        }
    }

    /// Number of π pulses at repetition count `n`.
    pub fn pulse_count(&self, n: u32) -> u32 {
        match self.kind {
            SequenceKind::Hahn => 1,
            k => k.phases().map_or(0, |p| p.len() as u32 * n),
        }
    }

    /// Free evolution time in µs for one point.
    pub fn free_time_us(&self, tau_ns: f64, n: u32) -> f64 {
        let pulses = self.pulse_count(n);
        let spacings = if pulses == 0 { 1 } else { pulses };
        spacings as f64 * tau_ns * 1e-3
    }
}
