//! ε-sweeps, exponent fits and their persisted artifacts.

mod fit;
mod report;
mod sweep;

pub use fit::{fit_rate, ols, oscillation_decay_fit, LineFit, OscillationFit, RateFit, FitWindow};
pub use report::{parse_rate_csv, rate_csv, rate_plot_csv, rate_svg, read_rate_csv, write_manifest, write_rate_csv, Manifest};
pub use sweep::{dyadic_radii, grid_rule, sweep_epsilon, RateRow, RateTable, SweepOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blow-up exponents α in |Du| ~ ε^{−α} bracketed by the gradient theorems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremTargets {
    pub upper_exponent: f64,
    /// Only known in two dimensions.
    pub lower_exponent: Option<f64>,
    pub notes: Vec<String>,
}

impl TheoremTargets {
    /// Band [lower, upper] used for plots; the lower end falls back to the
    /// upper one when no lower bound is available.
    pub fn band(&self) -> (f64, f64) {
        (self.lower_exponent.unwrap_or(self.upper_exponent), self.upper_exponent)
    }
}

pub fn theorem_targets(n: usize, p: f64, delta: f64) -> Result<TheoremTargets> {
    if n < 2 {
        return Err(Error::config(format!("n must be at least 2, got {n}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::config(format!("p must exceed 1, got {p}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::config(format!("delta must lie in [0, 1), got {delta}")));
    }
    let nf = n as f64;
    let mut notes = Vec::new();
    let upper = if p <= nf + 1.0 {
        0.5
    } else {
        if delta == 0.0 {
            notes.push("upper exponent for p > n + 1 holds for every delta > 0; delta = 0 is the limit".into());
        }
        (nf + 2.0 * delta) / (2.0 * (p - 1.0))
    };
    let lower = if n == 2 {
        if delta == 0.0 {
            notes.push("lower exponent is approached from below: any delta > 0 gives the stated value minus a margin".into());
        }
        Some(if p <= 3.0 { (1.0 - delta) / 2.0 } else { (1.0 - delta) / (p - 1.0) })
    } else {
        notes.push("for n >= 3 the upper bound improves to 1/2 - beta with an unspecified beta > 0".into());
        None
    };
    Ok(TheoremTargets { upper_exponent: upper, lower_exponent: lower, notes })
}
