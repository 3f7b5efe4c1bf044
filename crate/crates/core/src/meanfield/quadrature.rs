use crate::error::{Error, Result};
use crate::spin_core::Vec3;

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Product rule on the unit sphere: Gauss–Legendre in cos θ, trapezoid in φ.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn product(n_theta: usize) -> Self {
        let n_phi = 2 * n_theta;
        let (x, w) = gauss_legendre(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (xi, wi) in x.iter().zip(&w) {
            let st = (1.0 - xi * xi).max(0.0).sqrt();
            for j in 0..n_phi {
                // Half-step offset keeps nodes off the φ = 0 symmetry plane.
                let phi = (j as f64 + 0.5) * dphi;
                points.push(Vec3::new(st * phi.cos(), st * phi.sin(), *xi));
                weights.push(wi * dphi);
            }
        }
        Self { points, weights }
    }

    pub fn integrate<F: Fn(&Vec3) -> f64>(&self, f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// Orders tried in sequence until successive estimates agree.
pub const ORDERS: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

#[derive(Debug, Clone, Copy)]
pub struct Converged {
    pub value: f64,
    pub n_theta: usize,
    pub rel_change: f64,
}

/// Escalate the grid until the relative change drops below `tol`.
pub fn integrate_sphere<F: Fn(&SphereGrid) -> f64>(f: F, tol: f64) -> Result<Converged> {
    let mut prev: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    for &n in ORDERS.iter() {
        let v = f(&SphereGrid::product(n));
        if let Some(p) = prev {
            let scale = v.abs().max(p.abs());
            last_change = if scale == 0.0 { 0.0 } else { (v - p).abs() / scale };
            if last_change < tol {
                return Ok(Converged { value: v, n_theta: n, rel_change: last_change });
            }
        }
        prev = Some(v);
    }
    Err(Error::Quadrature(last_change))
}
