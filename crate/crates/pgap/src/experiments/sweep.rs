use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Region};
use crate::solver::{gradient_field, oscillation, solve, SolverConfig};

/// Largest dyadic radius of the oscillation sweep.
pub const OSC_BASE_RADIUS: f64 = 0.45;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub epsilon: f64,
    /// max |Du| over cells with |x′| ≤ 8√(ε/δ_window).
    pub max_grad_neck: f64,
    pub max_grad_global: f64,
    pub argmax_xp: Vec<f64>,
    /// (r, osc_{Ω_r} u) for dyadic r in (√ε, 1/2).
    pub osc: Vec<(f64, f64)>,
    pub converged: bool,
    pub iters: usize,
    pub grid_ns: usize,
    pub grid_nt: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub geometry: serde_json::Value,
    pub config: serde_json::Value,
}

impl RateTable {
    pub fn converged_rows(&self) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(|r| r.converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// δ of the neck window 8√(ε/δ).
    pub window_delta: f64,
    /// Scale grid_ns per ε so the central cell is at most √ε/4 wide.
    pub auto_resolution: bool,
    /// Worker threads; None uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { window_delta: 0.25, auto_resolution: true, workers: None }
    }
}

/// Tangential cells per axis for which the graded axis on [−R, R] with ratio
/// `q` has a central cell no wider than √ε/4. Always even and at least 8.
pub fn grid_rule(epsilon: f64, outer_radius: f64, q: f64) -> usize {
    let h = epsilon.sqrt() / 4.0;
    let half = if q > 1.0 {
        ((1.0 + outer_radius * (q - 1.0) / h).ln() / q.ln()).ceil()
    } else {
        (outer_radius / h).ceil()
    };
    (2 * half as usize).max(8)
}

/// r_k = 0.45·2^{−k} for every k with r_k > √ε.
pub fn dyadic_radii(epsilon: f64) -> Vec<f64> {
    let floor = epsilon.sqrt();
    (0..)
        .map(|k| OSC_BASE_RADIUS * 0.5f64.powi(k))
        .take_while(|&r| r > floor)
        .collect()
}

fn validate_epsilons(epsilons: &[f64]) -> Result<()> {
    for (i, &e) in epsilons.iter().enumerate() {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {e}")));
        }
        if epsilons[..i].contains(&e) {
            return Err(Error::config(format!("duplicate epsilon {e}")));
        }
        if i > 0 && !(e < epsilons[i - 1]) {
            return Err(Error::config("epsilons must be strictly decreasing"));
        }
    }
    Ok(())
}

fn run_row(geom: &GapGeometry<f64>, cfg: &SolverConfig<f64>, eps: f64, opts: &SweepOptions) -> Result<RateRow> {
    let g = geom.with_epsilon(eps)?;
    let mut cfg = cfg.clone();
    if opts.auto_resolution {
        cfg.grid_ns = grid_rule(eps, cfg.outer_radius, cfg.grading);
    }
    let field = solve(&g, &cfg)?;
    let cg = gradient_field(&field);
    let m = g.tangential_dim();
    let window = 8.0 * (eps / opts.window_delta).sqrt();
    let neck = cg
        .centers
        .iter()
        .zip(&cg.norms)
        .filter(|(c, _)| c[..m].iter().map(|v| v * v).sum::<f64>().sqrt() <= window)
        .map(|(_, &n)| n)
        .fold(0.0, f64::max);
    let mut osc = Vec::new();
    for r in dyadic_radii(eps) {
        if r > cfg.outer_radius {
            continue;
        }
        let region = Region::neck(vec![0.0; m], r)?;
        osc.push((r, oscillation(&field, &region)?));
    }
    Ok(RateRow {
        epsilon: eps,
        max_grad_neck: neck,
        max_grad_global: cg.max,
        argmax_xp: cg.argmax_xp().to_vec(),
        osc,
        converged: field.report.converged,
        iters: field.report.iterations,
        grid_ns: cfg.grid_ns,
        grid_nt: cfg.grid_nt,
        energy: field.report.energy,
    })
}

/// One solve per ε, in parallel. Rows come back in the order of `epsilons`;
/// non-converged solves are kept and flagged.
pub fn sweep_epsilon(
    geom: &GapGeometry<f64>,
    cfg: &SolverConfig<f64>,
    epsilons: &[f64],
    opts: &SweepOptions,
) -> Result<RateTable> {
    validate_epsilons(epsilons)?;
    cfg.validate()?;
    if !(opts.window_delta > 0.0) {
        return Err(Error::config("window_delta must be positive"));
    }
    let job = || epsilons.par_iter().map(|&e| run_row(geom, cfg, e, opts)).collect::<Result<Vec<_>>>();
    let rows = match opts.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?
            .install(job)?,
        None => job()?,
    };
    Ok(RateTable { rows, geometry: geom.descriptor(), config: config_descriptor(cfg, opts) })
}

fn config_descriptor(cfg: &SolverConfig<f64>, opts: &SweepOptions) -> serde_json::Value {
    serde_json::json!({
        "p": cfg.p,
        "eta": cfg.eta,
        "grid_ns": cfg.grid_ns,
        "grid_nt": cfg.grid_nt,
        "grading": cfg.grading,
        "outer_radius": cfg.outer_radius,
        "dirichlet": cfg.dirichlet.label(),
        "newton_tol": cfg.newton_tol,
        "max_newton": cfg.max_newton,
        "window_delta": opts.window_delta,
        "auto_resolution": opts.auto_resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rule_resolves_the_neck() {
        for eps in [1e-2, 1e-3, 1e-4] {
            let ns = grid_rule(eps, 0.5, 1.05);
            let axis = crate::solver::graded_axis(0.5, 1.05, ns).unwrap();
            let mid = ns / 2;
            assert!(axis[mid + 1] - axis[mid] <= eps.sqrt() / 4.0 * (1.0 + 1e-12));
            assert_eq!(ns % 2, 0);
        }
        assert_eq!(grid_rule(0.5, 0.5, 1.0), 8);
    }

    #[test]
    fn radii() {
        assert_eq!(dyadic_radii(1e-3), vec![0.45, 0.225, 0.1125, 0.05625]);
        assert!(dyadic_radii(0.25).is_empty());
    }

    #[test]
    fn epsilon_lists() {
        assert!(validate_epsilons(&[]).is_ok());
        assert!(validate_epsilons(&[1e-2, 1e-2]).is_err());
        assert!(validate_epsilons(&[1e-3, 1e-2]).is_err());
        assert!(validate_epsilons(&[1e-2, 0.0]).is_err());
    }
}
