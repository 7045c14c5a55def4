use serde::{Deserialize, Serialize};

use super::sweep::RateTable;
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::scalar::Scalar;
use crate::solver::{oscillation, DiscreteField};

pub const MIN_FIT_POINTS: usize = 4;

/// Ordinary least squares y = intercept + slope·x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    pub points: usize,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::invariant("x and y differ in length"));
    }
    if n < 3 {
        return Err(Error::TooFewPoints { got: n, need: 3 });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|&v| (v - my) * (v - my)).sum();
    if !(sxx > 0.0) || !sxx.is_finite() || !syy.is_finite() {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(&a, &b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(LineFit { slope, intercept, stderr, r2, points: n })
}

/// Which rows enter a rate fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    /// Drop the largest ε (pre-asymptotic).
    pub exclude_largest: bool,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    /// Fit the global maximum instead of the neck-window maximum.
    pub use_global: bool,
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow { exclude_largest: true, eps_min: None, eps_max: None, use_global: false }
    }
}

/// Slope α̂ of log max|Du| against log(1/ε).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    /// ε values that entered the fit.
    pub window: Vec<f64>,
}

pub fn fit_rate(table: &RateTable, window: &FitWindow) -> Result<RateFit> {
    let largest = table.rows.iter().map(|r| r.epsilon).fold(f64::NEG_INFINITY, f64::max);
    let rows: Vec<_> = table
        .rows
        .iter()
        .filter(|r| r.converged)
        .filter(|r| !(window.exclude_largest && r.epsilon == largest))
        .filter(|r| window.eps_min.is_none_or(|e| r.epsilon >= e))
        .filter(|r| window.eps_max.is_none_or(|e| r.epsilon <= e))
        .collect();
    if rows.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { got: rows.len(), need: MIN_FIT_POINTS });
    }
    let x: Vec<f64> = rows.iter().map(|r| (1.0 / r.epsilon).ln()).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| if window.use_global { r.max_grad_global } else { r.max_grad_neck })
        .map(f64::ln)
        .collect();
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-positive gradient maximum".into()));
    }
    let f = ols(&x, &y)?;
    Ok(RateFit { slope: f.slope, intercept: f.intercept, stderr: f.stderr, r2: f.r2, window: rows.iter().map(|r| r.epsilon).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationFit {
    pub beta_hat: f64,
    pub stderr: f64,
    pub r2: f64,
    pub radii: Vec<f64>,
    pub osc: Vec<f64>,
}

/// Slope of log osc_{Ω_r} u against log r over the given radii, which must
/// lie in (√ε, 1/2).
pub fn oscillation_decay_fit<T: Scalar>(field: &DiscreteField<T>, radii: &[f64]) -> Result<OscillationFit> {
    if radii.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { got: radii.len(), need: MIN_FIT_POINTS });
    }
    let geom = &field.chart.geom;
    let sqrt_eps = geom.epsilon.to_f64_lossy().sqrt();
    if let Some(r) = radii.iter().find(|&&r| !(r > sqrt_eps && r < 0.5)) {
        return Err(Error::config(format!("radius {r} outside (sqrt(eps), 1/2) = ({sqrt_eps}, 0.5)")));
    }
    let m = geom.tangential_dim();
    let mut osc = Vec::with_capacity(radii.len());
    for &r in radii {
        let region = Region::neck(vec![T::zero(); m], T::lit(r))?;
        osc.push(oscillation(field, &region)?.to_f64_lossy());
    }
    if osc.iter().any(|&o| !(o > 0.0)) {
        return Err(Error::DegenerateFit("oscillation vanishes on some radius".into()));
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
    let f = ols(&x, &y)?;
    Ok(OscillationFit { beta_hat: f.slope, stderr: f.stderr, r2: f.r2, radii: radii.to_vec(), osc })
}
