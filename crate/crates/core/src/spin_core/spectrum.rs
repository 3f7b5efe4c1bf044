use serde::{Deserialize, Serialize};

use super::operator::{eigensystem, HermitianOperator};
use crate::error::{Error, Result};

/// Gaps below this (MHz) are treated as degenerate and reported at frequency 0.
pub const DEGENERATE_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Eigenstate indices in ascending-energy order, `upper > lower`.
    pub upper: usize,
    pub lower: usize,
    pub freq: f64,
    /// |⟨upper|drive|lower⟩|², summed over drive components.
    pub strength: f64,
}

/// Allowed transitions of `h` under a single drive operator.
pub fn transition_spectrum(
    h: &HermitianOperator,
    drive: &HermitianOperator,
    amplitude_threshold: f64,
) -> Result<Vec<Transition>> {
    transition_spectrum_multi(h, &[drive], amplitude_threshold)
}

/// Strengths are summed over several drive components (e.g. both transverse axes).
pub fn transition_spectrum_multi(
    h: &HermitianOperator,
    drives: &[&HermitianOperator],
    amplitude_threshold: f64,
) -> Result<Vec<Transition>> {
    for d in drives {
        if d.dim() != h.dim() {
            return Err(Error::DimensionMismatch(h.dim(), d.dim()));
        }
    }
    let eig = eigensystem(h)?;
    let n = h.dim();
    let mut strength = vec![vec![0.0; n]; n];
    for d in drives {
        let m = eig.transform(d);
        for a in 0..n {
            for b in 0..n {
                strength[a][b] += m[(a, b)].norm_sqr();
            }
        }
    }
    let mut max = 0.0f64;
    for a in 0..n {
        for b in 0..a {
            max = max.max(strength[a][b]);
        }
    }
    let mut out = Vec::new();
    if max == 0.0 {
        return Ok(out);
    }
    for a in 0..n {
        for b in 0..a {
            let s = 0.5 * (strength[a][b] + strength[b][a]);
            if s >= amplitude_threshold * max {
                let gap = eig.values[a] - eig.values[b];
                let freq = if gap.abs() < DEGENERATE_GAP { 0.0 } else { gap };
                out.push(Transition { upper: a, lower: b, freq, strength: s });
            }
        }
    }
    out.sort_by(|x, y| x.freq.total_cmp(&y.freq));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_core::{identity, spin_operators, SpinQuantum};

    #[test]
    fn identity_drive_has_no_lines() {
        let s = spin_operators(SpinQuantum::one());
        let h = s.sz.scale(3.0);
        assert!(transition_spectrum(&h, &identity(3), 1e-4).unwrap().is_empty());
    }

    #[test]
    fn spin_half_single_line() {
        let s = spin_operators(SpinQuantum::half());
        let t = transition_spectrum(&s.sz.scale(10.0), &s.sx, 1e-4).unwrap();
        assert_eq!(t.len(), 1);
        assert!((t[0].freq - 10.0).abs() < 1e-12);
        assert!((t[0].strength - 0.25).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = spin_operators(SpinQuantum::half()).sz;
        let b = spin_operators(SpinQuantum::one()).sz;
        assert!(transition_spectrum(&a, &b, 1e-4).is_err());
    }
}
