use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A synchronized swap of two bath levels at `time`, applied in the listed groups
/// (all groups when `groups` is empty). `efficiency` is the flip contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSwap {
    pub time: f64,
    pub levels: (usize, usize),
    pub groups: Vec<usize>,
    pub efficiency: f64,
}

/// Piecewise-constant sensor gate s(t) ∈ {±1} and bath-level swaps on [0, T] (µs).
///
/// The bath gates r_n(t) follow from the swaps: a spin starting in level i occupies
/// the level given by [`SequenceGates::trajectory`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceGates {
    pub total_time: f64,
    /// (start time, sign) segments; the first starts at 0.
    pub sensor: Vec<(f64, i8)>,
    pub swaps: Vec<LevelSwap>,
    /// Length of the swept variable the decay exponent is divided by.
    pub sweep_length: f64,
}

impl SequenceGates {
    pub fn new(total_time: f64, sensor: Vec<(f64, i8)>, swaps: Vec<LevelSwap>, sweep_length: f64) -> Result<Self> {
        let g = Self { total_time, sensor, swaps, sweep_length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("gates: {m}")));
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return bad("total time must be positive");
        }
        if !(self.sweep_length > 0.0) {
            return bad("sweep length must be positive");
        }
        if self.sensor.first().map(|s| s.0) != Some(0.0) {
            return bad("sensor gate must start at t = 0");
        }
        for w in self.sensor.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("breakpoints must increase strictly");
            }
        }
        if self.sensor.iter().any(|s| s.1 != 1 && s.1 != -1) {
            return bad("sensor gate values must be ±1");
        }
        if self.sensor.last().map_or(false, |s| s.0 >= self.total_time) {
            return bad("breakpoint beyond total time");
        }
        for w in self.swaps.windows(2) {
            if w[1].time < w[0].time {
                return bad("swaps must be time-ordered");
            }
        }
        for s in &self.swaps {
            if !(s.time > 0.0 && s.time < self.total_time) {
                return bad("swap outside (0, T)");
            }
            if !(0.0..=1.5).contains(&s.efficiency) {
                return bad("swap efficiency out of range");
            }
            if s.levels.0 == s.levels.1 {
                return bad("swap needs two distinct levels");
            }
        }
        Ok(())
    }

    /// Free evolution (Ramsey) for duration t.
    pub fn free(t: f64) -> Result<Self> {
        Self::new(t, vec![(0.0, 1)], vec![], t)
    }

    /// Hahn echo: sensor inverted at t/2, bath untouched.
    pub fn echo(t: f64) -> Result<Self> {
        Self::new(t, vec![(0.0, 1), (0.5 * t, -1)], vec![], t)
    }

    /// Duration-sweep DEER: echo with the (n, m) pair swapped together with the sensor π pulse.
    pub fn deer_duration(t: f64, pair: (usize, usize), groups: Vec<usize>, efficiency: f64) -> Result<Self> {
        Self::new(
            t,
            vec![(0.0, 1), (0.5 * t, -1)],
            vec![LevelSwap { time: 0.5 * t, levels: pair, groups, efficiency }],
            t,
        )
    }

    /// Pulse-sweep DEER: fixed echo of length 2·t_fix, bath pulse moved by `shift` from the end.
    pub fn deer_pulse_sweep(
        t_fix: f64,
        shift: f64,
        pair: (usize, usize),
        groups: Vec<usize>,
        efficiency: f64,
    ) -> Result<Self> {
        if !(shift > 0.0 && shift < t_fix) {
            return Err(Error::InvalidInput("pulse shift must lie in (0, T_fix)".into()));
        }
        Self::new(
            2.0 * t_fix,
            vec![(0.0, 1), (t_fix, -1)],
            vec![LevelSwap { time: 2.0 * t_fix - shift, levels: pair, groups, efficiency }],
            shift,
        )
    }

    /// Free evolution with each listed pair swapped at t/2 (ideal bath driving).
    pub fn driven_free(t: f64, pairs: &[(usize, usize)], group: usize) -> Result<Self> {
        let swaps = pairs
            .iter()
            .map(|&p| LevelSwap { time: 0.5 * t, levels: p, groups: vec![group], efficiency: 1.0 })
            .collect();
        Self::new(t, vec![(0.0, 1)], swaps, t)
    }

    fn sensor_at(&self, t: f64) -> f64 {
        let mut v = self.sensor[0].1;
        for &(t0, s) in &self.sensor {
            if t0 <= t {
                v = s;
            }
        }
        v as f64
    }

    /// Level occupied over time by a spin starting in `start` (group `group`),
    /// with ideal swaps. Returns (start time, level) segments.
    pub fn trajectory(&self, start: usize, group: usize) -> Vec<(f64, usize)> {
        let mut out = vec![(0.0, start)];
        let mut cur = start;
        for s in &self.swaps {
            if !s.groups.is_empty() && !s.groups.contains(&group) {
                continue;
            }
            let next = if cur == s.levels.0 {
                s.levels.1
            } else if cur == s.levels.1 {
                s.levels.0
            } else {
                continue;
            };
            cur = next;
            if out.last().map(|l| l.0) == Some(s.time) {
                out.last_mut().unwrap().1 = cur;
            } else {
                out.push((s.time, cur));
            }
        }
        out
    }

    /// r_n(t): 1 when a spin that started in `start` sits in level n at time t.
    pub fn r_gate(&self, n: usize, start: usize, group: usize, t: f64) -> u8 {
        let tr = self.trajectory(start, group);
        let mut lvl = start;
        for &(t0, l) in &tr {
            if t0 <= t {
                lvl = l;
            }
        }
        u8::from(lvl == n)
    }

    /// ∫ s(t)·[level occupancy] dt per level, for a spin starting in `start`.
    /// Swap efficiency η mixes the flipped and unflipped histories linearly.
    pub fn level_weights(&self, start: usize, group: usize, n_levels: usize) -> Vec<f64> {
        let flipped = self.weights_for(start, group, n_levels, true);
        let eta = self
            .swaps
            .iter()
            .filter(|s| s.groups.is_empty() || s.groups.contains(&group))
            .map(|s| s.efficiency)
            .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
        match eta {
            Some(e) if (e - 1.0).abs() > 0.0 => {
                let still = self.weights_for(start, group, n_levels, false);
                flipped.iter().zip(&still).map(|(f, s)| s + e * (f - s)).collect()
            }
            _ => flipped,
        }
    }

    fn weights_for(&self, start: usize, group: usize, n_levels: usize, with_swaps: bool) -> Vec<f64> {
        let tr = if with_swaps { self.trajectory(start, group) } else { vec![(0.0, start)] };
        let mut cuts: Vec<f64> = self.sensor.iter().map(|s| s.0).chain(tr.iter().map(|t| t.0)).collect();
        cuts.push(self.total_time);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut w = vec![0.0; n_levels];
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            let mut lvl = start;
            for &(t0, l) in &tr {
                if t0 <= mid {
                    lvl = l;
                }
            }
            if lvl < n_levels {
                w[lvl] += self.sensor_at(mid) * (b - a);
            }
        }
        w
    }
}
