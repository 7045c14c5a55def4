use std::sync::Arc;

use sprs::CsMat;

use super::config::SolverConfig;
use super::field::DiscreteField;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Energy, gradient and Hessian of the discrete functional.
///
/// Rows and columns of Dirichlet nodes are replaced by the identity and their
/// gradient entries are zero.
#[derive(Debug, Clone)]
pub struct EnergyEval<T: Scalar> {
    pub energy: T,
    pub grad: Vec<T>,
    pub hess: CsMat<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum HessianKind {
    Newton,
    /// Lagged coefficient: vol·a·GᵀG, always positive semidefinite.
    Picard,
}

/// Density f(ξ) = (η+|ξ|²)^{p/2}/p and the coefficients a = s^{(p−2)/2},
/// b = (p−2)s^{(p−4)/2} of its derivatives.
#[inline]
fn density<T: Scalar>(sq: T, p: T, eta: T, cell: usize) -> Result<(T, T, T)> {
    let s = eta + sq;
    let two = lit::<T>(2.0);
    if s == T::zero() {
        if p < two {
            return Err(Error::NonFinite { cell, what: "degenerate gradient with p < 2 and eta = 0".into() });
        }
        let a = if p == two { T::one() } else { T::zero() };
        return Ok((T::zero(), a, T::zero()));
    }
    let a = s.powf((p - two) / two);
    let f = a * s / p;
    let b = (p - two) * a / s;
    Ok((f, a, b))
}

/// Neumaier-compensated sum, so that energy differences near a minimizer
/// stay resolvable by the line search.
#[derive(Debug, Clone, Copy)]
struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    fn new() -> Self {
        CompensatedSum { sum: T::zero(), comp: T::zero() }
    }

    fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Sparsity pattern shared by every Hessian on one mesh.
#[derive(Debug, Clone)]
pub(crate) struct Assembler<T: Scalar> {
    pub mesh: Arc<Mesh<T>>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Per simplex, data slot of local entry (a, b); `usize::MAX` when a row or
    /// column is a Dirichlet node.
    slots: Vec<[usize; 16]>,
    diag: Vec<usize>,
}

impl<T: Scalar> Assembler<T> {
    pub fn new(mesh: Arc<Mesh<T>>) -> Self {
        let nn = mesh.n_nodes();
        let k = mesh.dim + 1;
        let mut rows: Vec<Vec<usize>> = (0..nn).map(|i| vec![i]).collect();
        for s in &mesh.simplices {
            for a in 0..k {
                let i = s.verts[a];
                if mesh.dirichlet[i] {
                    continue;
                }
                for b in 0..k {
                    let j = s.verts[b];
                    if !mesh.dirichlet[j] {
                        rows[i].push(j);
                    }
                }
            }
        }
        let mut indptr = Vec::with_capacity(nn + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
            indices.extend_from_slice(r);
            indptr.push(indices.len());
        }
        let find = |i: usize, j: usize| -> usize {
            let row = &indices[indptr[i]..indptr[i + 1]];
            indptr[i] + row.binary_search(&j).expect("entry in pattern")
        };
        let diag: Vec<usize> = (0..nn).map(|i| find(i, i)).collect();
        let slots = mesh
            .simplices
            .iter()
            .map(|s| {
                let mut sl = [usize::MAX; 16];
                for a in 0..k {
                    for b in 0..k {
                        let (i, j) = (s.verts[a], s.verts[b]);
                        if !mesh.dirichlet[i] && !mesh.dirichlet[j] {
                            sl[a * 4 + b] = find(i, j);
                        }
                    }
                }
                sl
            })
            .collect();
        Assembler { mesh, indptr, indices, slots, diag }
    }

    pub fn energy(&self, u: &[T], p: T, eta: T) -> Result<T> {
        let mut total = CompensatedSum::new();
        for (id, s) in self.mesh.simplices.iter().enumerate() {
            let xi = self.mesh.simplex_gradient(s, u);
            let sq = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let (f, _, _) = density(sq, p, eta, s.cell)?;
            let term = s.vol * f;
            if !term.is_finite() {
                return Err(Error::NonFinite { cell: s.cell, what: format!("energy in simplex {id}") });
            }
            total.add(term);
        }
        Ok(total.value())
    }

    /// J(v) − J(u) computed term by term from the change of each simplex
    /// gradient, accurate even when the difference is below the resolution of J.
    pub fn energy_change(&self, u: &[T], v: &[T], p: T, eta: T) -> Result<T> {
        let half_p = p * lit(0.5);
        let diff: Vec<T> = v.iter().zip(u).map(|(&a, &b)| a - b).collect();
        let mut total = CompensatedSum::new();
        for s in &self.mesh.simplices {
            let x0 = self.mesh.simplex_gradient(s, u);
            let dx = self.mesh.simplex_gradient(s, &diff);
            let s0 = eta + x0[0] * x0[0] + x0[1] * x0[1] + x0[2] * x0[2];
            let ds = (0..3).map(|i| dx[i] * (x0[i] + x0[i] + dx[i])).sum::<T>();
            let df = if s0 > T::zero() {
                s0.powf(half_p) * (half_p * (ds / s0).ln_1p()).exp_m1() / p
            } else {
                density(ds, p, eta, s.cell)?.0
            };
            let term = s.vol * df;
            if !term.is_finite() {
                return Err(Error::NonFinite { cell: s.cell, what: "energy change".into() });
            }
            total.add(term);
        }
        Ok(total.value())
    }

    pub fn assemble(&self, u: &[T], p: T, eta: T, kind: HessianKind) -> Result<EnergyEval<T>> {
        let mesh = &*self.mesh;
        let n = mesh.dim;
        let k = n + 1;
        let nn = mesh.n_nodes();
        let mut grad = vec![T::zero(); nn];
        let mut data = vec![T::zero(); self.indices.len()];
        let mut energy = CompensatedSum::new();
        for (s, sl) in mesh.simplices.iter().zip(&self.slots) {
            let xi = mesh.simplex_gradient(s, u);
            let sq = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let (f, a, b) = density(sq, p, eta, s.cell)?;
            energy.add(s.vol * f);
            // Gᵀξ per vertex
            let mut gx = [T::zero(); 4];
            for v in 0..k {
                let mut acc = T::zero();
                for i in 0..n {
                    acc += s.grad[i][v] * xi[i];
                }
                gx[v] = acc;
                let node = s.verts[v];
                if !mesh.dirichlet[node] {
                    grad[node] += s.vol * a * acc;
                }
            }
            for va in 0..k {
                for vb in 0..k {
                    let slot = sl[va * 4 + vb];
                    if slot == usize::MAX {
                        continue;
                    }
                    let mut gg = T::zero();
                    for i in 0..n {
                        gg += s.grad[i][va] * s.grad[i][vb];
                    }
                    let mut h = a * gg;
                    if kind == HessianKind::Newton {
                        h += b * (gx[va] * gx[vb]);
                    }
                    data[slot] += s.vol * h;
                }
            }
        }
        let energy = energy.value();
        if !energy.is_finite() {
            return Err(Error::NonFinite { cell: 0, what: "total energy".into() });
        }
        for i in 0..nn {
            if mesh.dirichlet[i] {
                data[self.diag[i]] = T::one();
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let row = self.indptr.partition_point(|&q| q <= pos) - 1;
            return Err(Error::NonFinite { cell: row, what: "Hessian entry".into() });
        }
        let hess = CsMat::new((nn, nn), self.indptr.clone(), self.indices.clone(), data);
        Ok(EnergyEval { energy, grad, hess })
    }
}

/// Energy, gradient and Hessian at the field's nodal values with the
/// configuration's target (p, η).
pub fn assemble_energy<T: Scalar>(field: &DiscreteField<T>, cfg: &SolverConfig<T>) -> Result<EnergyEval<T>> {
    Assembler::new(field.mesh.clone()).assemble(&field.values, cfg.p, cfg.eta, HessianKind::Newton)
}

pub fn energy_value<T: Scalar>(field: &DiscreteField<T>, cfg: &SolverConfig<T>) -> Result<T> {
    Assembler::new(field.mesh.clone()).energy(&field.values, cfg.p, cfg.eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_disk_geometry, GapGeometry, Profile};
    use crate::transforms::NeckChart;

    fn flat_mesh() -> Arc<Mesh<f64>> {
        // slab of height 1/2 over [-0.5, 0.5]
        let g = GapGeometry::new(2, 0.5, Profile::Polynomial(vec![]), Profile::Polynomial(vec![]), 1.0, 1.0).unwrap();
        let chart = NeckChart::centered(g, 0.5).unwrap();
        Arc::new(Mesh::build(&chart, 8, 8, 1.0).unwrap())
    }

    #[test]
    fn constant_field_has_zero_energy() {
        let mesh = flat_mesh();
        let asm = Assembler::new(mesh.clone());
        let u = vec![3.0; mesh.n_nodes()];
        let e = asm.assemble(&u, 3.0, 0.0, HessianKind::Newton).unwrap();
        assert_eq!(e.energy, 0.0);
        assert!(e.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_field_on_unit_slab() {
        let mesh = flat_mesh();
        let asm = Assembler::new(mesh.clone());
        let u: Vec<f64> = (0..mesh.n_nodes()).map(|i| mesh.point(i)[0]).collect();
        let j = asm.energy(&u, 2.0, 0.0).unwrap();
        // |Du| = 1, so J is half the area
        assert!((j - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hessian_is_symmetric() {
        let g = make_disk_geometry(0.01f64).unwrap();
        let chart = NeckChart::centered(g, 0.5).unwrap();
        let mesh = Arc::new(Mesh::build(&chart, 16, 8, 1.05).unwrap());
        let asm = Assembler::new(mesh.clone());
        let u: Vec<f64> = (0..mesh.n_nodes()).map(|i| (3.0 * mesh.point(i)[0]).sin() + mesh.point(i)[1]).collect();
        let e = asm.assemble(&u, 3.5, 1e-6, HessianKind::Newton).unwrap();
        let t = e.hess.transpose_view().to_csr();
        for (v, (i, j)) in e.hess.iter() {
            let w = t.get(i, j).copied().unwrap_or(0.0);
            assert!((v - w).abs() <= 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_gradient_for_small_p_is_reported() {
        let mesh = flat_mesh();
        let asm = Assembler::new(mesh.clone());
        let u = vec![0.0; mesh.n_nodes()];
        assert!(matches!(asm.assemble(&u, 1.5, 0.0, HessianKind::Newton), Err(Error::NonFinite { .. })));
    }
}
