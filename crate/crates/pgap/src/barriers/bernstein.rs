use serde::Serialize;

use super::{appendix_q, bernstein_q, bernstein_quantity, BarrierSpec, BarrierVariant};
use crate::error::{Error, Result};
use crate::geometry::{sample_ball, GapGeometry, Side};
use crate::scalar::{dot, lit, norm, Scalar};
use crate::solver::DiscreteField;

/// Second-order derivative of samples `f` at abscissae `x`, index `i`.
fn derivative_3pt<T: Scalar>(x: [T; 3], f: [T; 3], at: usize) -> T {
    let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
    let s = h1 + h2;
    match at {
        0 => -(h1 + s) / (h1 * s) * f[0] + s / (h1 * h2) * f[1] - h1 / (h2 * s) * f[2],
        1 => -h2 / (h1 * s) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * s) * f[2],
        _ => h2 / (h1 * s) * f[0] - s / (h1 * h2) * f[1] + (h2 + s) / (h2 * s) * f[2],
    }
}

/// Position of index `i` in a three-point stencil on `0..len`.
fn stencil(i: usize, len: usize) -> (usize, usize) {
    if i == 0 {
        (0, 0)
    } else if i + 1 == len {
        (len - 3, 2)
    } else {
        (i - 1, 1)
    }
}

/// Nodal gradients of nodal `values` by finite differences in the chart
/// coordinates (x′, t), with x_n = L(x′) + t·g(x′), mapped back to x.
///
/// Three-point stencils throughout, one-sided at the ends of each axis.
pub fn chart_gradient<T: Scalar>(field: &DiscreteField<T>, values: &[T]) -> Result<Vec<Vec<T>>> {
    let mesh = &field.mesh;
    let geom = &field.chart.geom;
    let m = geom.tangential_dim();
    if values.len() != mesh.n_nodes() {
        return Err(Error::invariant("value vector does not match the mesh"));
    }
    if mesh.nt < 2 || mesh.axes.iter().any(|a| a.len() < 3) {
        return Err(Error::GridTooCoarse("finite differences need three nodes per axis".into()));
    }
    let nt = mesh.nt;
    let dt = T::one() / T::from_usize_lossy(nt);
    let mut out = Vec::with_capacity(mesh.n_nodes());
    for node in 0..mesh.n_nodes() {
        let ti = mesh.tangential_index(node);
        let j = mesh.transverse_index(node);
        let xp: Vec<T> = (0..m).map(|k| mesh.axes[k][ti[k]]).collect();
        let t = T::from_usize_lossy(j) * dt;
        let (j0, at) = stencil(j, nt + 1);
        let ft = [0, 1, 2].map(|q| values[mesh.node_id(&ti, j0 + q)]);
        let xt = [0, 1, 2].map(|q| T::from_usize_lossy(j0 + q) * dt);
        let u_t = derivative_3pt(xt, ft, at);
        let g = geom.gap_width(&xp);
        let dl = geom.h_lower.gradient(&xp);
        let du = geom.h_upper.gradient(&xp);
        let mut grad = Vec::with_capacity(m + 1);
        for k in 0..m {
            let axis = &mesh.axes[k];
            let (i0, at) = stencil(ti[k], axis.len());
            let mut idx = ti.clone();
            let fs = [0, 1, 2].map(|q| {
                idx[k] = i0 + q;
                values[mesh.node_id(&idx, j)]
            });
            let xs = [0, 1, 2].map(|q| axis[i0 + q]);
            let u_s = derivative_3pt(xs, fs, at);
            let dg = du[k] - dl[k];
            grad.push(u_s - u_t * (dl[k] + t * dg) / g);
        }
        grad.push(u_t / g);
        out.push(grad);
    }
    Ok(out)
}

/// Extreme eigenvalues of D²h₁ and −D²h₂ over |x′| ≤ radius.
pub fn measure_kappa<T: Scalar>(geom: &GapGeometry<T>, radius: T, samples: usize, seed: u64) -> Result<(T, T)> {
    if !(radius > T::zero() && radius <= geom.domain_radius()) {
        return Err(Error::config(format!("kappa radius {radius} outside the profile domain")));
    }
    let m = geom.tangential_dim();
    let mut pts = sample_ball(m, radius.to_f64_lossy(), samples.max(2), seed);
    // the center and the sampled sphere carry the extremes of radial profiles
    pts.push(vec![0.0; m]);
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = radius.to_f64_lossy();
        pts.push(e.clone());
        e[k] = -e[k];
        pts.push(e);
    }
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for p in pts {
        let xp: Vec<T> = p.iter().map(|&c| lit(c)).collect();
        let ev = geom.h_upper.hessian(&xp).sym_eigenvalues();
        let ev2 = geom.h_lower.hessian(&xp).scale(-T::one()).sym_eigenvalues();
        for e in ev.into_iter().chain(ev2) {
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone)]
pub struct BernsteinOptions {
    /// Gradient floor relative to the largest nodal |Du|.
    pub floor_rel: f64,
    /// Relative slack on both sides of the boundary inequality, for the
    /// discretization error of the nodal second derivatives.
    pub rel_tol: f64,
    /// Boundary samples are taken on |x′| ≤ this radius; κ's are measured there.
    /// Defaults to 0.8 of the chart radius.
    pub sample_radius: Option<f64>,
    pub exponents: Vec<f64>,
}

impl Default for BernsteinOptions {
    fn default() -> Self {
        BernsteinOptions { floor_rel: 1e-3, rel_tol: 0.05, sample_radius: None, exponents: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub s: f64,
    /// D_ν|Du|^s.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySample {
    pub point: Vec<f64>,
    pub side: Side,
    pub grad_norm: f64,
    /// D_ν of the Bernstein quantity.
    pub dnu_f: f64,
    /// Empty when |Du| is below the floor.
    pub checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BernsteinReport {
    pub variant: BarrierVariant,
    pub q_values: Vec<f64>,
    pub f_values: Vec<f64>,
    pub argmax_node: usize,
    pub argmax_point: Vec<f64>,
    pub max_f: f64,
    pub floor: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub rel_tol: f64,
    pub boundary: Vec<BoundarySample>,
    /// (s, checked samples, samples where the bound holds).
    pub summary: Vec<(f64, usize, usize)>,
}

impl BernsteinReport {
    /// Fraction of checked samples where the bound holds for exponent `s`;
    /// None when no sample was above the floor.
    pub fn pass_fraction(&self, s: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|e| e.0 == s)
            .and_then(|&(_, n, ok)| (n > 0).then(|| ok as f64 / n as f64))
    }
}

/// Evaluates Q and the Bernstein quantity at every node, locates its maximum
/// and samples normal derivatives on Γ± away from the lateral boundary.
pub fn bernstein_eval<T: Scalar>(
    spec: &BarrierSpec<T>,
    field: &DiscreteField<T>,
    opts: &BernsteinOptions,
) -> Result<BernsteinReport> {
    let q_of: fn(&BarrierSpec<T>, &[T]) -> T = match spec.variant {
        BarrierVariant::BernsteinF => bernstein_q,
        BarrierVariant::AppendixF => appendix_q,
        _ => return Err(Error::config("bernstein_eval needs a Bernstein or appendix quantity")),
    };
    if !(spec.kappa1 > T::zero() && spec.kappa2 >= spec.kappa1 && spec.kappa2.is_finite()) {
        return Err(Error::config("Bernstein quantities need 0 < kappa1 <= kappa2"));
    }
    let mesh = &field.mesh;
    let geom = &field.chart.geom;
    let m = geom.tangential_dim();
    let grads = chart_gradient(field, &field.values)?;
    let norms: Vec<T> = grads.iter().map(|g| norm(g)).collect();
    let mut q_values = Vec::with_capacity(norms.len());
    let mut f_nodal = Vec::with_capacity(norms.len());
    for (node, &gn) in norms.iter().enumerate() {
        let x = mesh.point(node);
        let q = q_of(spec, x);
        q_values.push(q.to_f64_lossy());
        f_nodal.push(bernstein_quantity(spec, q, gn, field.values[node]));
    }
    let (argmax_node, max_f) = f_nodal
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let gmax = norms.iter().fold(T::zero(), |a, &b| a.max(b));
    let floor = lit::<T>(opts.floor_rel) * gmax;

    let radius = opts.sample_radius.map_or(field.chart.outer_radius * lit(0.8), lit);
    let (k1, k2) = measure_kappa(geom, radius, 2000, 0)?;
    let dnu_f = chart_gradient(field, &f_nodal)?;
    let exponents = if opts.exponents.is_empty() { vec![2.0, spec.p.to_f64_lossy()] } else { opts.exponents.clone() };
    let powered: Vec<(f64, Vec<Vec<T>>)> = exponents
        .iter()
        .map(|&s| {
            let q: Vec<T> = norms.iter().map(|&g| g.powf(lit(s))).collect();
            chart_gradient(field, &q).map(|d| (s, d))
        })
        .collect::<Result<_>>()?;

    let tol = opts.rel_tol;
    let mut boundary = Vec::new();
    let mut summary: Vec<(f64, usize, usize)> = exponents.iter().map(|&s| (s, 0, 0)).collect();
    for node in 0..mesh.n_nodes() {
        let j = mesh.transverse_index(node);
        if (j != 0 && j != mesh.nt) || mesh.dirichlet[node] {
            continue;
        }
        let x = mesh.point(node);
        let xp = &x[..m];
        if norm(xp) > radius {
            continue;
        }
        let side = if j == mesh.nt { Side::Upper } else { Side::Lower };
        let nu = geom.inner_normal(side, xp)?;
        let gn = norms[node];
        let mut checks = Vec::new();
        if gn > floor && gn > T::zero() {
            for (k, (s, d)) in powered.iter().enumerate() {
                let base = *s * gn.powf(lit(*s)).to_f64_lossy();
                let value = dot(&d[node], &nu).to_f64_lossy();
                let (lower, upper) = (base * k1.to_f64_lossy(), base * k2.to_f64_lossy());
                let holds = value >= lower * (1.0 - tol) && value <= upper * (1.0 + tol);
                summary[k].1 += 1;
                summary[k].2 += holds as usize;
                checks.push(BoundCheck { s: *s, value, lower, upper, holds });
            }
        }
        boundary.push(BoundarySample {
            point: x.iter().map(|c| c.to_f64_lossy()).collect(),
            side,
            grad_norm: gn.to_f64_lossy(),
            dnu_f: dot(&dnu_f[node], &nu).to_f64_lossy(),
            checks,
        });
    }
    Ok(BernsteinReport {
        variant: spec.variant,
        q_values,
        f_values: f_nodal.iter().map(|v| v.to_f64_lossy()).collect(),
        argmax_node,
        argmax_point: mesh.point(argmax_node).iter().map(|c| c.to_f64_lossy()).collect(),
        max_f: max_f.to_f64_lossy(),
        floor: floor.to_f64_lossy(),
        kappa1: k1.to_f64_lossy(),
        kappa2: k2.to_f64_lossy(),
        rel_tol: tol,
        boundary,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_point_stencils_are_exact_on_quadratics() {
        let x = [0.0, 0.3, 1.0];
        let f = x.map(|v: f64| 2.0 + 3.0 * v - v * v);
        for (at, &xv) in x.iter().enumerate() {
            assert!((derivative_3pt(x, f, at) - (3.0 - 2.0 * xv)).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_kappa() {
        let g = crate::geometry::make_disk_geometry(1e-2f64).unwrap();
        let (k1, k2) = measure_kappa(&g, 0.5, 500, 0).unwrap();
        assert!((k1 - 1.0).abs() < 1e-12, "{k1} {k2}");
        assert!((k2 - 0.75f64.powf(-1.5)).abs() < 1e-12);
    }
}
