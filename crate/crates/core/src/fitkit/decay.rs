use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOutcome};
use crate::error::{Error, Result};
use crate::pulsesim::DecayCurve;

pub const STRETCH_MIN: f64 = 0.3;
pub const STRETCH_MAX: f64 = 3.0;
const MAX_ITER: usize = 500;
const N_STARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Exp,
    StretchedExp,
    GaussianDecay,
    Linear,
    OdmrDip,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::Exp => "exp",
            FitModel::StretchedExp => "stretched_exp",
            FitModel::GaussianDecay => "gaussian_decay",
            FitModel::Linear => "linear",
            FitModel::OdmrDip => "odmr_dip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "exp" => FitModel::Exp,
            "stretched_exp" | "stretched" => FitModel::StretchedExp,
            "gaussian_decay" | "gaussian" => FitModel::GaussianDecay,
            "linear" => FitModel::Linear,
            "odmr_dip" => FitModel::OdmrDip,
            other => return Err(Error::InvalidInput(format!("unknown fit model '{other}'"))),
        })
    }
}

/// One standard deviation on each reported parameter (0 when held fixed).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamErrors {
    pub rate_khz: f64,
    pub stretch: f64,
    pub amplitude: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    /// kHz for curves in µs.
    pub rate_khz: f64,
    pub stretch: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub offset_fitted: bool,
    pub errors: ParamErrors,
    /// √Σ r² of the (weighted) residuals.
    pub residual_norm: f64,
    pub aicc: f64,
    pub n_points: usize,
    pub n_params: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

impl FitResult {
    /// Model value at `t` µs.
    pub fn eval(&self, t: f64) -> f64 {
        let g = self.rate_khz * 1e-3;
        match self.model {
            FitModel::Linear => self.amplitude - g * t + self.offset,
            _ => self.amplitude * (-(g * t).powf(self.stretch)).exp() + self.offset,
        }
    }
}

/// Starting point for a single local fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecaySeed {
    pub rate_khz: f64,
    pub amplitude: f64,
    pub stretch: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub fit_offset: bool,
}

#[derive(Clone, Copy)]
struct Layout {
    model: FitModel,
    offset: bool,
}

impl Layout {
    // Parameter order: Γ (1/µs), A, [p], [c]. Linear: slope magnitude Γ, intercept A, [c] unused.
    fn n(&self) -> usize {
        match self.model {
            FitModel::Linear => 2,
            FitModel::StretchedExp => 3 + self.offset as usize,
            _ => 2 + self.offset as usize,
        }
    }

    fn stretch_idx(&self) -> Option<usize> {
        (self.model == FitModel::StretchedExp).then_some(2)
    }

    fn offset_idx(&self) -> Option<usize> {
        if !self.offset || self.model == FitModel::Linear {
            return None;
        }
        Some(if self.model == FitModel::StretchedExp { 3 } else { 2 })
    }

    fn fixed_stretch(&self) -> f64 {
        if self.model == FitModel::GaussianDecay {
            2.0
        } else {
            1.0
        }
    }

    /// Model values and Jacobian over `t`.
    fn eval(&self, p: &[f64], t: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let k = self.n();
        let mut y = vec![0.0; t.len()];
        let mut j = DMatrix::zeros(t.len(), k);
        if self.model == FitModel::Linear {
            for (i, &ti) in t.iter().enumerate() {
                y[i] = p[1] - p[0] * ti;
                j[(i, 0)] = -ti;
                j[(i, 1)] = 1.0;
            }
            return (y, j);
        }
        let g = p[0];
        let a = p[1];
        let s = self.stretch_idx().map_or(self.fixed_stretch(), |i| p[i]);
        let c = self.offset_idx().map_or(0.0, |i| p[i]);
        for (i, &ti) in t.iter().enumerate() {
            let x = g * ti;
            let u = if x > 0.0 { x.powf(s) } else { 0.0 };
            let e = (-u).exp();
            y[i] = a * e + c;
            j[(i, 0)] = if g > 0.0 { -a * e * s * u / g } else { 0.0 };
            j[(i, 1)] = e;
            if let Some(si) = self.stretch_idx() {
                j[(i, si)] = if x > 0.0 { -a * e * u * x.ln() } else { 0.0 };
            }
            if let Some(ci) = self.offset_idx() {
                j[(i, ci)] = 1.0;
            }
        }
        (y, j)
    }
}

fn weights(curve: &DecayCurve) -> Vec<f64> {
    if curve.sigma.iter().all(|s| *s > 0.0) {
        curve.sigma.iter().map(|s| 1.0 / s).collect()
    } else {
        vec![1.0; curve.len()]
    }
}

/// Model-only evaluation with analytic Jacobian, exposed for gradient checks.
pub fn decay_model_jacobian(model: FitModel, fit_offset: bool, params: &[f64], t: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    Layout { model, offset: fit_offset }.eval(params, t)
}

/// Weighted least-squares fit of one decay model with deterministic multi-start.
pub fn fit_decay(curve: &DecayCurve, model: FitModel, seed: Option<DecaySeed>) -> Result<FitResult> {
    fit_decay_with(curve, model, seed, FitOptions::default())
}

pub fn fit_decay_with(curve: &DecayCurve, model: FitModel, seed: Option<DecaySeed>, opts: FitOptions) -> Result<FitResult> {
    curve.validate()?;
    if model == FitModel::OdmrDip {
        return Err(Error::InvalidInput("odmr_dip applies to spectra, use fit_zero_field_odmr".into()));
    }
    let n = curve.len();
    if n < 8 {
        return Err(Error::InsufficientData(format!("{n} points, need at least 8")));
    }
    let lay = Layout { model, offset: opts.fit_offset };
    let k = lay.n();
    let w = weights(curve);
    let t = &curve.t;
    let y = &curve.signal;

    let t_max = t[n - 1].abs().max(t[0].abs());
    let t_min = t.iter().map(|x| x.abs()).filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
    if !(t_max > 0.0) {
        return Err(Error::InvalidInput("time axis has no extent".into()));
    }
    let t_min = if t_min.is_finite() { t_min } else { t_max };
    let y0 = if y[0].abs() > 0.0 { y[0] } else { y.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m }) };
    let amp_scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);

    let mut lower = vec![0.0; k];
    let mut upper = vec![0.0; k];
    lower[0] = if model == FitModel::Linear { f64::NEG_INFINITY } else { 1e-9 / t_max };
    upper[0] = if model == FitModel::Linear { f64::INFINITY } else { 1e6 / t_min };
    lower[1] = -1e3 * amp_scale;
    upper[1] = 1e3 * amp_scale;
    if let Some(si) = lay.stretch_idx() {
        lower[si] = STRETCH_MIN;
        upper[si] = STRETCH_MAX;
    }
    if let Some(ci) = lay.offset_idx() {
        lower[ci] = -1e3 * amp_scale;
        upper[ci] = 1e3 * amp_scale;
    }

    let residual_model = |p: &[f64]| {
        let (m, mut j) = lay.eval(p, t);
        let r: Vec<f64> = (0..n).map(|i| (m[i] - y[i]) * w[i]).collect();
        for i in 0..n {
            for c in 0..k {
                j[(i, c)] *= w[i];
            }
        }
        (r, j)
    };

    let starts: Vec<Vec<f64>> = if let Some(s) = seed {
        vec![pack(&lay, s.rate_khz * 1e-3, s.amplitude, s.stretch, s.offset)]
    } else if model == FitModel::Linear {
        let (a, b) = linear_guess(t, y);
        vec![vec![-b, a]]
    } else {
        let lo = (0.5 / t_max).ln();
        let hi = (2.0 / t_min).ln().max(lo + 1e-6);
        let c0 = if opts.fit_offset { y[n - 1] } else { 0.0 };
        (0..N_STARTS)
            .map(|i| {
                let g = (lo + (hi - lo) * i as f64 / (N_STARTS - 1) as f64).exp();
                pack(&lay, g, y0 - c0, 1.0, c0)
            })
            .collect()
    };

    let mut best: Option<LmOutcome> = None;
    for p0 in &starts {
        let o = levenberg_marquardt(&residual_model, p0, &lower, &upper, MAX_ITER);
        if best.as_ref().map_or(true, |b| o.cost < b.cost || (!b.converged && o.converged && o.cost <= b.cost)) {
            best = Some(o);
        }
    }
    let best = best.expect("at least one start");
    if !best.converged {
        return Err(Error::FitFailed(format!(
            "{} did not converge; best cost {:.3e} at {:?}",
            model.name(),
            best.cost,
            best.params
        )));
    }
    Ok(finish(&lay, &best, n, curve.sigma.iter().all(|s| *s > 0.0)))
}

fn pack(lay: &Layout, g: f64, a: f64, s: f64, c: f64) -> Vec<f64> {
    let mut p = vec![g, a];
    if lay.stretch_idx().is_some() {
        p.push(s.clamp(STRETCH_MIN, STRETCH_MAX));
    }
    if lay.offset_idx().is_some() {
        p.push(c);
    }
    p
}

fn linear_guess(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mt, b)
}

fn finish(lay: &Layout, o: &LmOutcome, n: usize, weighted: bool) -> FitResult {
    let k = lay.n();
    let rss = 2.0 * o.cost;
    let dof = n.saturating_sub(k).max(1) as f64;
    let jtj = o.jacobian.transpose() * &o.jacobian;
    let cov = jtj.try_inverse().unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
    // Without per-point σ the residual scatter sets the noise level.
    let scale = if weighted { (rss / dof).max(1.0) } else { rss / dof };
    let err = |i: usize| {
        let v = cov[(i, i)] * scale;
        if v.is_finite() && v > 0.0 {
            v.sqrt()
        } else {
            0.0
        }
    };
    let p = &o.params;
    let stretch = lay.stretch_idx().map_or(lay.fixed_stretch(), |i| p[i]);
    let offset = lay.offset_idx().map_or(0.0, |i| p[i]);
    let errors = ParamErrors {
        rate_khz: err(0) * 1e3,
        amplitude: err(1),
        stretch: lay.stretch_idx().map_or(0.0, err),
        offset: lay.offset_idx().map_or(0.0, err),
    };
    FitResult {
        model: lay.model,
        rate_khz: p[0] * 1e3,
        stretch: if lay.model == FitModel::Linear { 1.0 } else { stretch },
        amplitude: p[1],
        offset,
        offset_fitted: lay.offset_idx().is_some(),
        errors,
        residual_norm: rss.sqrt(),
        aicc: aicc(rss, n, k),
        n_points: n,
        n_params: k,
        converged: o.converged,
        grad_norm: o.grad_norm,
    }
}

/// Small-sample corrected Akaike criterion for a Gaussian likelihood.
pub fn aicc(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let base = nf * (rss.max(1e-300) / nf).ln() + 2.0 * kf;
    if n > k + 1 {
        base + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0)
    } else {
        f64::INFINITY
    }
}

/// Lowest-AICc decay model among exp, stretched and Gaussian, each tried with and
/// without a free offset. Ties go to the model listed first (exp).
pub fn model_select(curve: &DecayCurve) -> Result<FitResult> {
    if curve.len() < 12 {
        return Err(Error::InsufficientData(format!("{} points, need at least 12", curve.len())));
    }
    let mut best: Option<FitResult> = None;
    for offset in [false, true] {
        for model in [FitModel::Exp, FitModel::GaussianDecay, FitModel::StretchedExp] {
            let Ok(f) = fit_decay_with(curve, model, None, FitOptions { fit_offset: offset }) else {
                continue;
            };
            let better = match &best {
                None => true,
                Some(b) => f.aicc < b.aicc - 1e-9 * b.aicc.abs().max(1.0),
            };
            if better {
                best = Some(f);
            }
        }
    }
    best.ok_or_else(|| Error::FitFailed("no candidate model converged".into()))
}
