use nalgebra::{DMatrix, DVector};

/// Residuals and Jacobian (rows = points, columns = parameters) at a parameter vector.
pub type Model<'a> = dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>) + 'a;

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    /// ½ Σ r²
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// ‖Jᵀr‖ with components at active bounds removed.
    pub grad_norm: f64,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

/// Damped least squares with Marquardt scaling and box bounds.
pub fn levenberg_marquardt(
    model: &Model,
    p0: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iter: usize,
) -> LmOutcome {
    let k = p0.len();
    let clamp = |p: &mut [f64]| {
        for i in 0..k {
            p[i] = p[i].clamp(lower[i], upper[i]);
        }
    };
    let mut p = p0.to_vec();
    clamp(&mut p);
    let (mut r, mut j) = model(&p);
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let jm = &j;
        let rv = DVector::from_column_slice(&r);
        let g = jm.transpose() * &rv;
        let a = jm.transpose() * jm;
        let dmax = (0..k).map(|i| a[(i, i)]).fold(0.0f64, f64::max).max(1e-300);
        let mut accepted = false;
        while lambda < 1e20 {
            let mut m = a.clone();
            for i in 0..k {
                m[(i, i)] += lambda * a[(i, i)].max(1e-12 * dmax);
            }
            let step = match m.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut pn: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut pn);
            let (rn, jn) = model(&pn);
            let cn = cost_of(&rn);
            if cn.is_finite() && cn <= cost {
                let dp: f64 = pn.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let pn_norm: f64 = pn.iter().map(|x| x * x).sum::<f64>().sqrt();
                let dc = cost - cn;
                p = pn;
                r = rn;
                j = jn;
                cost = cn;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if dp <= 1e-13 * (pn_norm + 1e-13) || dc <= 1e-16 * cost || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // No descent direction left at any damping: we are at a (bounded) minimum.
            converged = true;
        }
        if converged {
            break;
        }
    }
    let grad_norm = projected_grad(&p, &r, &j, lower, upper);
    LmOutcome { params: p, residuals: r, jacobian: j, cost, iterations: it, converged, grad_norm }
}

fn projected_grad(p: &[f64], r: &[f64], j: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> f64 {
    let g = j.transpose() * DVector::from_column_slice(r);
    let mut s = 0.0;
    for i in 0..p.len() {
        let at_lo = p[i] <= lower[i] && g[i] > 0.0;
        let at_hi = p[i] >= upper[i] && g[i] < 0.0;
        if !(at_lo || at_hi) {
            s += g[i] * g[i];
        }
    }
    s.sqrt()
}

/// Central finite-difference Jacobian of a residual function.
pub fn numeric_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> DMatrix<f64> {
    let r0 = f(p);
    let mut j = DMatrix::zeros(r0.len(), p.len());
    for c in 0..p.len() {
        let h = 1e-6 * p[c].abs().max(1e-6);
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[c] += h;
        b[c] -= h;
        let (ra, rb) = (f(&a), f(&b));
        for i in 0..r0.len() {
            j[(i, c)] = (ra[i] - rb[i]) / (2.0 * h);
        }
    }
    j
}
