use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{eval_barrier, BarrierSpec, BarrierVariant};
use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Region, Side};
use crate::scalar::{dot, lit, Scalar};

const MAX_LISTED: usize = 100;
const BISECTION_STEPS: usize = 80;
/// Radial levels scanned for the Hessian continuity radius.
const R0_LEVELS: usize = 400;

#[derive(Debug, Clone, Serialize)]
pub struct SignViolation {
    pub point: Vec<f64>,
    /// "interior", "upper" or "lower".
    pub location: String,
    /// The quantity that should be positive (−div for v, div for w, ±∂/∂ν).
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub variant: BarrierVariant,
    pub n: usize,
    pub p: f64,
    pub delta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub admissible: bool,
    /// Cone opening for v: P(1, s²) < 0 on s ∈ [0, μ₀].
    pub mu0: Option<f64>,
    /// Hessian continuity radius (v) or sign radius (w).
    pub r0: Option<f64>,
    pub mu: Option<f64>,
    /// Sampled footprint inner < |x′| < outer.
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    /// Interior samples outside |x_n| ≤ μ₀|x′|; zero when the construction is consistent.
    pub outside_cone: usize,
    /// Minimum of the quantity that must be positive in the interior
    /// (−div for v, div for w).
    pub min_interior: f64,
    /// Minimum of ∂v/∂ν (v) or −∂w/∂ν (w) on Γ±.
    pub min_boundary: f64,
    pub violation_count: usize,
    pub violations: Vec<SignViolation>,
    pub notes: Vec<String>,
}

impl CertificateReport {
    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// Interior samples; the boundary gets as many again.
    pub samples: usize,
    pub seed: u64,
    /// Replaces the computed cone opening μ₀ (v only).
    pub mu0: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { samples: 100_000, seed: 0, mu0: None }
    }
}

/// Extremum of c₀ + c₁t + c₂t² over [lo, hi].
fn quadratic_extreme(c: (f64, f64, f64), lo: f64, hi: f64, max: bool) -> f64 {
    let f = |t: f64| c.0 + c.1 * t + c.2 * t * t;
    let mut cand = vec![f(lo), f(hi)];
    if c.2 != 0.0 {
        let v = -c.1 / (2.0 * c.2);
        if v > lo && v < hi {
            cand.push(f(v));
        }
    }
    let pick = if max { f64::max } else { f64::min };
    cand.into_iter().reduce(pick).unwrap_or(f64::NAN)
}

/// Largest x in (0, cap] with `ok` on [0, x], by bisection; None if `ok`
/// fails for every positive x tried.
fn bisect_largest(cap: f64, ok: impl Fn(f64) -> bool) -> Option<f64> {
    if ok(cap) {
        return Some(cap);
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo > 0.0).then_some(lo)
}

fn coefficients<T: Scalar>(spec: &BarrierSpec<T>) -> (f64, f64, f64) {
    let (a, b, c) = spec.quartic_coefficients();
    (a.to_f64_lossy(), b.to_f64_lossy(), c.to_f64_lossy())
}

/// Largest μ ≤ 1/2 with P(1, s²) < 0 for s ∈ [0, μ].
pub fn cone_opening<T: Scalar>(spec: &BarrierSpec<T>) -> Option<f64> {
    let c = coefficients(spec);
    bisect_largest(0.5, |mu| quadratic_extreme(c, 0.0, mu * mu, true) < 0.0)
}

/// Largest r < 1/2 with |D²h(x′) − D²h(0)| ≤ κ₁δ/(8 + 2δ) on |x′| ≤ r for
/// both profiles, scanned on radial levels and sampled directions.
pub fn hessian_radius<T: Scalar>(geom: &GapGeometry<T>, kappa1: T, delta: T, seed: u64) -> Option<f64> {
    let m = geom.tangential_dim();
    let tol = (kappa1 * delta / (lit::<T>(8.0) + lit::<T>(2.0) * delta)).to_f64_lossy();
    let zero = vec![T::zero(); m];
    let h0 = [geom.h_upper.hessian(&zero), geom.h_lower.hessian(&zero)];
    let dirs = directions(m, 32, seed);
    let cap = 0.5f64.min(geom.domain_radius().to_f64_lossy());
    let mut last = None;
    for k in 1..=R0_LEVELS {
        let r = cap * k as f64 / R0_LEVELS as f64;
        let ok = dirs.iter().all(|d| {
            let xp: Vec<T> = d.iter().map(|&c| lit(r * c)).collect();
            [&geom.h_upper, &geom.h_lower].iter().zip(&h0).all(|(h, h0)| {
                let diff = h.hessian(&xp).add(&h0.scale(-T::one()));
                let spec = diff.sym_eigenvalues().iter().map(|e| e.abs().to_f64_lossy()).fold(0.0, f64::max);
                spec <= tol
            })
        });
        if !ok {
            break;
        }
        last = Some(if k == R0_LEVELS { r * (1.0 - 1e-12) } else { r });
    }
    last
}

/// Largest r ≤ 1 − 1e−9 with P(1, t) ≥ 0 for t ∈ [0, (1 + δ/8)²r²], the slope
/// range of the subsolution region.
pub fn sign_radius<T: Scalar>(spec: &BarrierSpec<T>) -> Option<f64> {
    let c = coefficients(spec);
    let k = (1.0 + spec.delta.to_f64_lossy() / 8.0).powi(2);
    bisect_largest(1.0 - 1e-9, |r| quadratic_extreme(c, 0.0, k * r * r, false) >= 0.0)
}

/// Unit vectors in ℝ^m: ±1 for m = 1, otherwise seeded random directions
/// including the coordinate axes.
fn directions(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    if m == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut out: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        out.push(random_direction(m, &mut rng));
    }
    out
}

fn random_direction(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if m == 1 {
        return vec![if rng.random_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-4 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

/// Direction number `k` of a deterministic sweep: alternating sign in 1D,
/// angles in the (x₁, x₂) plane otherwise.
fn grid_direction(m: usize, k: usize, count: usize) -> Vec<f64> {
    if m == 1 {
        return vec![if k.is_multiple_of(2) { 1.0 } else { -1.0 }];
    }
    let th = 2.0 * std::f64::consts::PI * k as f64 / count.max(1) as f64;
    let mut d = vec![0.0; m];
    d[0] = th.cos();
    d[1] = th.sin();
    d
}

/// Footprint radii: log-spaced when the inner radius is positive.
fn radius_at(lo: f64, hi: f64, s: f64) -> f64 {
    if lo > 0.0 {
        (lo.ln() + s * (hi.ln() - lo.ln())).exp()
    } else {
        lo + s * (hi - lo)
    }
}

/// (x′, t) pairs: a tensor grid over (radius, t, direction) plus ten times as
/// many seeded random points.
fn sample_footprint(m: usize, lo: f64, hi: f64, count: usize, seed: u64, t_grid: bool) -> Vec<(Vec<f64>, f64)> {
    let n_grid = (count / 11).max(1);
    let (nr, nt) = if t_grid {
        let nr = (n_grid as f64).sqrt().ceil() as usize;
        (nr, n_grid.div_ceil(nr))
    } else {
        (n_grid, 2)
    };
    let mut out = Vec::with_capacity(count + nr * nt);
    for i in 0..nr {
        // open interval in the radius
        let s = (i as f64 + 0.5) / nr as f64;
        let r = radius_at(lo, hi, s);
        for j in 0..nt {
            let t = if t_grid { j as f64 / (nt - 1).max(1) as f64 } else { (j % 2) as f64 };
            let d = grid_direction(m, i * nt + j, nr * nt);
            out.push((d.iter().map(|c| r * c).collect(), t));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count.max(n_grid * 11) {
        let s: f64 = rng.random_range(0.0..1.0);
        let r = radius_at(lo, hi, s);
        let t = if t_grid { rng.random_range(0.0..=1.0) } else if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let d = random_direction(m, &mut rng);
        out.push((d.iter().map(|c| r * c).collect(), t));
    }
    out
}

struct Plan {
    admissible: bool,
    mu0: Option<f64>,
    r0: Option<f64>,
    mu: Option<f64>,
    inner: f64,
    outer: f64,
    boundary_outer: f64,
    cone: f64,
    notes: Vec<String>,
}

fn plan_supersolution<T: Scalar>(spec: &BarrierSpec<T>, geom: &GapGeometry<T>, opts: &CertifyOptions) -> Plan {
    let eps = spec.epsilon.to_f64_lossy();
    let k2 = spec.kappa2.to_f64_lossy();
    let mut notes = vec![
        "interior sign: -div(|Dv|^{p-2}Dv) > 0; on the cone the leading coefficient n+δ+(p-1)(γ-1) is negative, so div < 0 there".to_string(),
    ];
    let mu0 = opts.mu0.or_else(|| cone_opening(spec));
    let r0 = hessian_radius(geom, spec.kappa1, spec.delta, opts.seed);
    let mut admissible = true;
    if mu0.is_none() {
        admissible = false;
        notes.push("no cone opening: P(1, s^2) >= 0 at s = 0 (gamma not admissible)".into());
    }
    if r0.is_none() {
        admissible = false;
        notes.push("no Hessian continuity radius found".into());
    }
    let mu = match (mu0, r0) {
        (Some(a), Some(b)) => Some(a.min(k2 * b)),
        _ => None,
    };
    if let Some(mu) = mu {
        if !(eps < mu * mu / k2) {
            admissible = false;
            notes.push(format!("epsilon = {eps} is not below mu^2/kappa2 = {}", mu * mu / k2));
        }
    }
    // sampling fallback keeps looking for violations when nothing is admissible
    let mu_s = mu.unwrap_or_else(|| 0.25f64.min(k2 * r0.unwrap_or(0.5)));
    let (inner, outer) = if eps / mu_s < mu_s / k2 { (eps / mu_s, mu_s / k2) } else { (0.5 * mu_s / k2, mu_s / k2) };
    Plan {
        admissible,
        mu0,
        r0,
        mu,
        inner,
        outer,
        boundary_outer: outer,
        cone: mu0.unwrap_or(mu_s),
        notes,
    }
}

fn plan_subsolution<T: Scalar>(spec: &BarrierSpec<T>, geom: &GapGeometry<T>) -> Plan {
    let eps = spec.epsilon.to_f64_lossy();
    let mut notes = vec!["interior sign: div(|Dw|^{p-2}Dw) >= 0; boundary: dw/dnu <= 0 with nu pointing out of the gap".to_string()];
    let r0 = sign_radius(spec);
    let mut admissible = r0.is_some();
    if r0.is_none() {
        notes.push("no sign radius: leading coefficient is negative (gamma not admissible)".into());
    }
    let dom = geom.domain_radius().to_f64_lossy();
    if !geom.h_upper.kind().eq("disk") || !geom.h_lower.kind().eq("disk") {
        admissible = false;
        notes.push("the subsolution construction assumes the two-disk geometry".into());
    }
    let outer = r0.unwrap_or(0.5).min(dom);
    let inner = eps.sqrt().min(0.1 * outer);
    Plan { admissible, mu0: None, r0, mu: None, inner, outer, boundary_outer: outer, cone: f64::INFINITY, notes }
}

/// Certifies the sign conditions of v or w by dense sampling of the closed
/// forms. Missing constants are reported, not thrown.
pub fn certify_sign<T: Scalar>(
    spec: &BarrierSpec<T>,
    geom: &GapGeometry<T>,
    region: &Region<T>,
    samples: usize,
) -> Result<CertificateReport> {
    certify_sign_with(spec, geom, region, &CertifyOptions { samples, ..Default::default() })
}

pub fn certify_sign_with<T: Scalar>(
    spec: &BarrierSpec<T>,
    geom: &GapGeometry<T>,
    region: &Region<T>,
    opts: &CertifyOptions,
) -> Result<CertificateReport> {
    let is_v = match spec.variant {
        BarrierVariant::SupersolutionV => true,
        BarrierVariant::SubsolutionW => false,
        _ => return Err(Error::config("certify_sign applies to the supersolution and subsolution barriers")),
    };
    if geom.dim != spec.n {
        return Err(Error::config(format!("geometry dimension {} differs from barrier n = {}", geom.dim, spec.n)));
    }
    if opts.samples == 0 {
        return Err(Error::config("certify_sign needs at least one sample"));
    }
    region.validate()?;
    let mut plan = if is_v { plan_supersolution(spec, geom, opts) } else { plan_subsolution(spec, geom) };
    if spec.validate().is_err() {
        plan.admissible = false;
        plan.notes.push("parameters outside the admissible range".into());
    }
    let m = geom.tangential_dim();
    let lift = |xp: &[f64], t: f64| -> Vec<T> {
        let xp: Vec<T> = xp.iter().map(|&c| lit(c)).collect();
        let lo = geom.lower_surface(&xp);
        let hi = geom.upper_surface(&xp);
        let xn = if t >= 1.0 { hi } else if t <= 0.0 { lo } else { lo + lit::<T>(t) * (hi - lo) };
        let mut x = xp;
        x.push(xn);
        x
    };
    let in_region = |x: &[T]| region.contains_xp(&x[..m]);

    let interior = sample_footprint(m, plan.inner, plan.outer, opts.samples, opts.seed, true);
    let boundary = sample_footprint(m, 0.0, plan.boundary_outer, opts.samples, opts.seed ^ 0x9e37_79b9, false);

    let cone = plan.cone;
    let interior_vals: Vec<Option<(Vec<f64>, f64, bool)>> = interior
        .par_iter()
        .map(|(xp, t)| {
            let x = lift(xp, *t);
            if !in_region(&x) {
                return None;
            }
            let e = eval_barrier(spec, &x).ok()?;
            let q = if is_v { -e.divergence } else { e.divergence };
            let xpn = xp.iter().map(|c| c * c).sum::<f64>().sqrt();
            let in_cone = x[m].to_f64_lossy().abs() <= cone * xpn;
            Some((x.iter().map(|c| c.to_f64_lossy()).collect(), q.to_f64_lossy(), in_cone))
        })
        .collect();
    let boundary_vals: Vec<Option<(Vec<f64>, f64, Side)>> = boundary
        .par_iter()
        .map(|(xp, t)| {
            let x = lift(xp, *t);
            if !in_region(&x) {
                return None;
            }
            let side = if *t >= 1.0 { Side::Upper } else { Side::Lower };
            let nu = geom.inner_normal(side, &x[..m]).ok()?;
            let e = eval_barrier(spec, &x).ok()?;
            let dn = dot(&e.gradient, &nu);
            let q = if is_v { dn } else { -dn };
            Some((x.iter().map(|c| c.to_f64_lossy()).collect(), q.to_f64_lossy(), side))
        })
        .collect();

    let mut violations = Vec::new();
    let mut count = 0usize;
    let mut push = |point: &Vec<f64>, location: &str, value: f64| {
        count += 1;
        if violations.len() < MAX_LISTED {
            violations.push(SignViolation { point: point.clone(), location: location.into(), value });
        }
    };
    let (mut n_int, mut n_bd, mut outside_cone) = (0, 0, 0);
    let (mut min_int, mut min_bd) = (f64::INFINITY, f64::INFINITY);
    for (x, q, in_cone) in interior_vals.iter().flatten() {
        if is_v && !in_cone {
            outside_cone += 1;
            continue;
        }
        n_int += 1;
        min_int = min_int.min(*q);
        let bad = if is_v { !(*q > 0.0) } else { !(*q >= 0.0) };
        if bad {
            push(x, "interior", *q);
        }
    }
    for (x, q, side) in boundary_vals.iter().flatten() {
        n_bd += 1;
        min_bd = min_bd.min(*q);
        let bad = if is_v { !(*q > 0.0) } else { !(*q >= 0.0) };
        if bad {
            push(x, if *side == Side::Upper { "upper" } else { "lower" }, *q);
        }
    }
    Ok(CertificateReport {
        variant: spec.variant,
        n: spec.n,
        p: spec.p.to_f64_lossy(),
        delta: spec.delta.to_f64_lossy(),
        gamma: spec.gamma.to_f64_lossy(),
        epsilon: spec.epsilon.to_f64_lossy(),
        admissible: plan.admissible,
        mu0: plan.mu0,
        r0: plan.r0,
        mu: plan.mu,
        inner_radius: plan.inner,
        outer_radius: plan.outer,
        interior_samples: n_int,
        boundary_samples: n_bd,
        outside_cone,
        min_interior: min_int,
        min_boundary: min_bd,
        violation_count: count,
        violations,
        notes: plan.notes,
    })
}
