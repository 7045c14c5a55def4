use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use super::config::SolverConfig;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::scalar::{lit, Scalar};
use crate::transforms::NeckChart;

/// One (p, η) continuation stage.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StageRecord {
    pub p: f64,
    pub eta: f64,
    pub iterations: usize,
    pub picard_steps: usize,
    /// Energy before the first step, then after every accepted step as the
    /// previous value plus the accurately computed change.
    pub energies: Vec<f64>,
    pub grad_norm: f64,
    /// max |Du| over cells at the end of the stage.
    pub max_grad: f64,
    pub converged: bool,
    /// Stopped because the Newton decrease fell below the rounding level of J.
    pub rounding_stop: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveReport {
    pub stages: Vec<StageRecord>,
    pub converged: bool,
    pub message: Option<String>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Nodal values on the chart mesh together with the run that produced them.
#[derive(Debug, Clone)]
pub struct DiscreteField<T: Scalar> {
    pub chart: NeckChart<T>,
    pub mesh: Arc<Mesh<T>>,
    pub values: Vec<T>,
    pub p: T,
    pub eta: T,
    pub dirichlet_label: String,
    pub report: SolveReport,
}

impl<T: Scalar> DiscreteField<T> {
    /// Field from nodal values; checks size and finiteness.
    pub fn new(chart: NeckChart<T>, mesh: Arc<Mesh<T>>, values: Vec<T>, cfg: &SolverConfig<T>) -> Result<Self> {
        if values.len() != mesh.n_nodes() {
            return Err(Error::invariant(format!("{} values for {} nodes", values.len(), mesh.n_nodes())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: i, what: "nodal value".into() });
        }
        Ok(DiscreteField {
            chart,
            mesh,
            values,
            p: cfg.p,
            eta: cfg.eta,
            dirichlet_label: cfg.dirichlet.label().to_string(),
            report: SolveReport::default(),
        })
    }

    /// Interpolates `f` at the physical node positions.
    pub fn from_fn(
        chart: NeckChart<T>,
        mesh: Arc<Mesh<T>>,
        cfg: &SolverConfig<T>,
        f: impl Fn(&[T]) -> T,
    ) -> Result<Self> {
        let values = (0..mesh.n_nodes()).map(|i| f(mesh.point(i))).collect();
        Self::new(chart, mesh, values, cfg)
    }

    pub fn min_max(&self) -> (T, T) {
        self.values.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Range of the values on Dirichlet nodes.
    pub fn dirichlet_range(&self) -> (T, T) {
        self.values
            .iter()
            .zip(&self.mesh.dirichlet)
            .filter(|(_, &d)| d)
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    }

    /// Self-describing JSON container.
    pub fn to_json(&self) -> serde_json::Value {
        let f = |v: T| v.to_f64_lossy();
        let g = &self.chart.geom;
        let axes: Vec<Vec<f64>> = self.mesh.axes.iter().map(|a| a.iter().map(|&v| f(v)).collect()).collect();
        json!({
            "format": "pgap-field/1",
            "geometry": {
                "dim": g.dim,
                "epsilon": f(g.epsilon),
                "h_upper": g.h_upper.kind(),
                "h_lower": g.h_lower.kind(),
                "c1": f(g.c1),
                "c2": f(g.c2),
            },
            "config": {
                "p": f(self.p),
                "eta": f(self.eta),
                "outer_radius": f(self.chart.outer_radius),
                "dirichlet": self.dirichlet_label,
            },
            "grid": {
                "tangential_axes": axes,
                "transverse_cells": self.mesh.nt,
                "node_order": "transverse index fastest, then tangential axes in order",
            },
            "values": self.values.iter().map(|&v| f(v)).collect::<Vec<_>>(),
            "trace": self.report,
        })
    }
}

/// Per-cell gradient in physical coordinates.
#[derive(Debug, Clone)]
pub struct CellGradients<T: Scalar> {
    pub centers: Vec<Vec<T>>,
    pub grads: Vec<Vec<T>>,
    pub norms: Vec<T>,
    pub argmax: usize,
    pub max: T,
}

impl<T: Scalar> CellGradients<T> {
    /// Tangential part of the argmax cell center.
    pub fn argmax_xp(&self) -> &[T] {
        let c = &self.centers[self.argmax];
        &c[..c.len() - 1]
    }
}

fn xp_norm<T: Scalar>(c: &[T]) -> T {
    c[..c.len() - 1].iter().map(|&v| v * v).sum::<T>().sqrt()
}

/// |Du| on every tensor cell: the volume-weighted mean of the simplex
/// gradients, located at the cell centroid. Ties in the maximum go to the
/// smallest |x′|, then to the lexicographically smallest center.
pub fn gradient_field<T: Scalar>(field: &DiscreteField<T>) -> CellGradients<T> {
    let mesh = &*field.mesh;
    let n = mesh.dim;
    let nc = mesh.n_cells;
    let mut vol = vec![T::zero(); nc];
    let mut grads = vec![vec![T::zero(); n]; nc];
    let mut centers = vec![vec![T::zero(); n]; nc];
    let w = T::one() / T::from_usize_lossy(n + 1);
    for s in &mesh.simplices {
        let g = mesh.simplex_gradient(s, &field.values);
        vol[s.cell] += s.vol;
        for i in 0..n {
            grads[s.cell][i] += s.vol * g[i];
            let mut c = T::zero();
            for v in 0..=n {
                c += mesh.point(s.verts[v])[i];
            }
            centers[s.cell][i] += s.vol * c * w;
        }
    }
    for c in 0..nc {
        for i in 0..n {
            grads[c][i] /= vol[c];
            centers[c][i] /= vol[c];
        }
    }
    let norms: Vec<T> = grads.iter().map(|g| g.iter().map(|&v| v * v).sum::<T>().sqrt()).collect();
    let mut argmax = 0;
    for c in 1..nc {
        let better = if norms[c] != norms[argmax] {
            norms[c] > norms[argmax]
        } else {
            let (a, b) = (xp_norm(&centers[c]), xp_norm(&centers[argmax]));
            a < b || (a == b && centers[c].partial_cmp(&centers[argmax]) == Some(std::cmp::Ordering::Less))
        };
        if better {
            argmax = c;
        }
    }
    let max = norms[argmax];
    CellGradients { centers, grads, norms, argmax, max }
}

/// sup − inf of nodal values over nodes whose x′ lies in `region`.
pub fn oscillation<T: Scalar>(field: &DiscreteField<T>, region: &Region<T>) -> Result<T> {
    region.validate()?;
    let mesh = &*field.mesh;
    let m = mesh.dim - 1;
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for (i, &v) in field.values.iter().enumerate() {
        if region.contains_xp(&mesh.point(i)[..m]) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        return Err(Error::invariant("region contains no grid nodes"));
    }
    Ok(hi - lo)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NeumannResidual {
    pub flux_l2_upper: f64,
    pub flux_l2_lower: f64,
}

/// L² norm over each profile of the conormal flux (η+|Du|²)^{(p−2)/2} ∂u/∂ν,
/// with Du the gradient of the simplex owning the facet.
pub fn neumann_residual<T: Scalar>(field: &DiscreteField<T>) -> NeumannResidual {
    let mesh = &*field.mesh;
    let two = lit::<T>(2.0);
    let (mut up, mut lo) = (T::zero(), T::zero());
    for f in &mesh.facets {
        let s = &mesh.simplices[f.simplex];
        let g = mesh.simplex_gradient(s, &field.values);
        let sq = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
        let dn = g[0] * f.normal[0] + g[1] * f.normal[1] + g[2] * f.normal[2];
        let s_reg = field.eta + sq;
        let a = if s_reg == T::zero() { T::zero() } else { s_reg.powf((field.p - two) / two) };
        let flux = a * dn;
        if f.upper {
            up += f.area * flux * flux;
        } else {
            lo += f.area * flux * flux;
        }
    }
    NeumannResidual { flux_l2_upper: up.sqrt().to_f64_lossy(), flux_l2_lower: lo.sqrt().to_f64_lossy() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk_geometry, GapGeometry, Profile};

    fn setup(eps: f64, flat: bool) -> (NeckChart<f64>, Arc<Mesh<f64>>, SolverConfig<f64>) {
        let g = if flat {
            GapGeometry::new(2, eps, Profile::Polynomial(vec![]), Profile::Polynomial(vec![]), 1.0, 1.0).unwrap()
        } else {
            make_disk_geometry(eps).unwrap()
        };
        let chart = NeckChart::centered(g, 0.5).unwrap();
        let mesh = Arc::new(Mesh::build(&chart, 16, 8, 1.05).unwrap());
        (chart, mesh, SolverConfig::new(2.0))
    }

    #[test]
    fn affine_field_has_constant_gradient() {
        let (chart, mesh, cfg) = setup(0.01, false);
        let f = DiscreteField::from_fn(chart, mesh, &cfg, |x| 0.3 * x[0] - 0.4 * x[1] + 2.0).unwrap();
        let cg = gradient_field(&f);
        for &v in &cg.norms {
            assert!((v - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn ties_go_to_the_center() {
        let (chart, mesh, cfg) = setup(0.01, false);
        let h = mesh.h_min();
        let f = DiscreteField::from_fn(chart, mesh, &cfg, |_| 0.0).unwrap();
        let cg = gradient_field(&f);
        assert_eq!(cg.max, 0.0);
        let x = cg.argmax_xp()[0];
        assert!(x < 0.0 && x > -h, "{x}");
        assert!(cg.centers[cg.argmax][1] < 0.0);
    }

    #[test]
    fn scaling_a_field() {
        let (chart, mesh, cfg) = setup(0.01, false);
        let base = |x: &[f64]| (x[0] * 3.0).sin() * (1.0 + x[1]);
        let f = DiscreteField::from_fn(chart.clone(), mesh.clone(), &cfg, base).unwrap();
        let g = DiscreteField::from_fn(chart, mesh, &cfg, |x| -2.0 * base(x) + 7.0).unwrap();
        let (a, b) = (gradient_field(&f), gradient_field(&g));
        assert_eq!(a.argmax, b.argmax);
        assert!((b.max - 2.0 * a.max).abs() < 1e-12);
    }

    #[test]
    fn oscillation_of_linear_field() {
        let (chart, mesh, cfg) = setup(0.5, true);
        let f = DiscreteField::from_fn(chart, mesh.clone(), &cfg, |x| x[0]).unwrap();
        let r = 0.2;
        let osc = oscillation(&f, &Region::neck(vec![0.0], r).unwrap()).unwrap();
        let h = mesh.axes[0].windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!((osc - 2.0 * r).abs() <= 2.0 * h);
        let c = DiscreteField::from_fn(f.chart.clone(), mesh, &cfg, |_| 1.5).unwrap();
        assert_eq!(oscillation(&c, &Region::Full).unwrap(), 0.0);
        assert!(oscillation(&c, &Region::annulus(vec![0.0], 0.6, 0.7).unwrap()).is_err());
    }

    #[test]
    fn residual_of_constant_and_transverse_fields() {
        let (chart, mesh, cfg) = setup(0.5, true);
        let c = DiscreteField::from_fn(chart.clone(), mesh.clone(), &cfg, |_| 1.0).unwrap();
        let r = neumann_residual(&c);
        assert_eq!((r.flux_l2_upper, r.flux_l2_lower), (0.0, 0.0));
        // u = x_n has unit flux on both faces of length 1
        let t = DiscreteField::from_fn(chart, mesh, &cfg, |x| x[1]).unwrap();
        let r = neumann_residual(&t);
        assert!((r.flux_l2_upper - 1.0).abs() < 1e-12 && (r.flux_l2_lower - 1.0).abs() < 1e-12);
    }
}
