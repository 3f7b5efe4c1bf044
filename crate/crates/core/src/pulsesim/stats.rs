use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-point ensemble mean and standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub draws: usize,
}

/// Reduces per-draw traces (`draws[d][point]`) in draw order.
pub fn mc_statistics(draws: &[Vec<f64>]) -> Result<McStats> {
    let d = draws.len();
    if d < 2 {
        return Err(Error::InsufficientData(format!("{d} draws, need at least 2")));
    }
    let n = draws[0].len();
    if draws.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("draws have unequal lengths".into()));
    }
    // Shifted by the first draw so constant traces give exactly zero spread.
    let x0 = &draws[0];
    let mut s1 = vec![0.0; n];
    let mut s2 = vec![0.0; n];
    for v in draws {
        for i in 0..n {
            let dx = v[i] - x0[i];
            s1[i] += dx;
            s2[i] += dx * dx;
        }
    }
    let df = d as f64;
    let mean = (0..n).map(|i| x0[i] + s1[i] / df).collect();
    let stderr = (0..n)
        .map(|i| ((s2[i] - s1[i] * s1[i] / df).max(0.0) / (df - 1.0)).sqrt() / df.sqrt())
        .collect();
    Ok(McStats { mean, stderr, draws: d })
}

/// Largest |Δmean| / combined σ over points, for comparing independent batches.
pub fn max_batch_deviation(a: &McStats, b: &McStats) -> f64 {
    a.mean
        .iter()
        .zip(&b.mean)
        .zip(a.stderr.iter().zip(&b.stderr))
        .map(|((x, y), (sx, sy))| {
            let s = (sx * sx + sy * sy).sqrt();
            if s > 0.0 {
                (x - y).abs() / s
            } else if x == y {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_has_zero_error() {
        let s = mc_statistics(&vec![vec![0.7, 0.2]; 10]).unwrap();
        assert_eq!(s.stderr, vec![0.0, 0.0]);
        assert_eq!(s.mean, vec![0.7, 0.2]);
    }

    #[test]
    fn single_draw_rejected() {
        assert!(mc_statistics(&[vec![1.0]]).is_err());
    }
}
