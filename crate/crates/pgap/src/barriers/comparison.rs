use serde::Serialize;

use super::{eval_barrier, BarrierSpec, BarrierVariant};
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::scalar::{lit, Scalar};
use crate::solver::DiscreteField;

const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonFit {
    /// max over region boundary nodes of |u|/(v + √ε).
    pub c_boundary: f64,
    pub boundary_nodes: usize,
    pub interior_nodes: usize,
    pub interior_violation_fraction: f64,
}

/// Fits the comparison constant C in |u| ≤ C(v + √ε) on the boundary of a
/// region and counts interior nodes where the bound fails.
///
/// Boundary nodes are region nodes with a tangential neighbour outside the
/// region or on the mesh edge.
pub fn comparison_fit<T: Scalar>(field: &DiscreteField<T>, spec: &BarrierSpec<T>, region: &Region<T>) -> Result<ComparisonFit> {
    if spec.variant != BarrierVariant::SupersolutionV {
        return Err(Error::config("comparison_fit uses the supersolution barrier"));
    }
    if spec.n != field.mesh.dim {
        return Err(Error::config("barrier dimension differs from the field"));
    }
    region.validate()?;
    let mesh = &field.mesh;
    let m = mesh.dim - 1;
    let shift = field.chart.geom.epsilon.sqrt();
    let inside = |node: usize| region.contains_xp(&mesh.point(node)[..m]);
    let ratio = |node: usize| -> Result<T> {
        let x = mesh.point(node);
        let v = if x.iter().all(|&c| c == T::zero()) { T::zero() } else { eval_barrier(spec, x)?.value };
        Ok(field.values[node].abs() / (v + shift))
    };

    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for node in 0..mesh.n_nodes() {
        if !inside(node) {
            continue;
        }
        let ti = mesh.tangential_index(node);
        let j = mesh.transverse_index(node);
        let edge = (0..m).any(|k| {
            let len = mesh.axes[k].len();
            [ti[k].checked_sub(1), (ti[k] + 1 < len).then_some(ti[k] + 1)].iter().any(|nb| match nb {
                None => true,
                Some(i) => {
                    let mut idx = ti.clone();
                    idx[k] = *i;
                    !inside(mesh.node_id(&idx, j))
                }
            })
        });
        if edge { boundary.push(node) } else { interior.push(node) }
    }
    if boundary.is_empty() {
        return Err(Error::config("region has no boundary nodes on this mesh"));
    }
    let mut c = T::zero();
    for &n in &boundary {
        c = c.max(ratio(n)?);
    }
    let mut bad = 0usize;
    for &n in &interior {
        if ratio(n)? > c * (T::one() + lit(VIOLATION_TOL)) {
            bad += 1;
        }
    }
    Ok(ComparisonFit {
        c_boundary: c.to_f64_lossy(),
        boundary_nodes: boundary.len(),
        interior_nodes: interior.len(),
        interior_violation_fraction: if interior.is_empty() { 0.0 } else { bad as f64 / interior.len() as f64 },
    })
}
