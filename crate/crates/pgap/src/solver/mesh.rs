use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{lit, Scalar};
use crate::transforms::NeckChart;

/// Symmetric tangential nodes on [−R, R]: `2m` cells growing by the ratio `q`
/// away from 0, so the two cells touching 0 have width R(q−1)/(q^m−1).
pub fn graded_axis<T: Scalar>(radius: T, q: T, cells: usize) -> Result<Vec<T>> {
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::config(format!("tangential cell count must be even and >= 2, got {cells}")));
    }
    let m = cells / 2;
    let mt = T::from_usize_lossy(m);
    let h0 = if q == T::one() { radius / mt } else { radius * (q - T::one()) / (q.powf(mt) - T::one()) };
    let mut half = Vec::with_capacity(m + 1);
    half.push(T::zero());
    let mut w = h0;
    let mut acc = T::zero();
    for k in 0..m {
        acc += w;
        half.push(if k + 1 == m { radius } else { acc });
        w *= q;
    }
    let mut nodes: Vec<T> = half.iter().rev().map(|&s| -s).collect();
    nodes.extend_from_slice(&half[1..]);
    Ok(nodes)
}

/// A P1 simplex: vertex node ids, barycentric gradients in physical
/// coordinates (column k is ∇λ_k) and volume.
#[derive(Debug, Clone)]
pub struct Simplex<T> {
    pub verts: [usize; 4],
    pub grad: [[T; 4]; 3],
    pub vol: T,
    pub cell: usize,
}

/// Boundary facet on the upper or lower profile.
#[derive(Debug, Clone)]
pub struct Facet<T> {
    pub simplex: usize,
    pub area: T,
    /// Unit normal pointing out of the gap.
    pub normal: [T; 3],
    pub upper: bool,
}

/// Tensor grid in chart coordinates with its physical image.
///
/// Node ordering: transverse index fastest, then the tangential axes.
/// Each tensor cell is split into n! simplices (Kuhn triangulation), with the
/// local axes reflected in the lower half of every axis so the mesh is
/// symmetric under x₁ ↦ −x₁ and under the transverse reflection.
#[derive(Debug, Clone)]
pub struct Mesh<T: Scalar> {
    pub dim: usize,
    pub axes: Vec<Vec<T>>,
    pub nt: usize,
    /// Physical node positions, `dim` entries per node.
    pub points: Vec<T>,
    pub dirichlet: Vec<bool>,
    pub simplices: Vec<Simplex<T>>,
    pub facets: Vec<Facet<T>>,
    pub n_cells: usize,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    match n {
        2 => vec![vec![0, 1], vec![1, 0]],
        3 => vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]],
        _ => unreachable!("mesh supports dimensions 2 and 3"),
    }
}

impl<T: Scalar> Mesh<T> {
    pub fn build(chart: &NeckChart<T>, grid_ns: usize, grid_nt: usize, grading: T) -> Result<Self> {
        let n = chart.geom.dim;
        if !(2..=3).contains(&n) {
            return Err(Error::config(format!("the solver supports n = 2 or 3, got {n}")));
        }
        let m = n - 1;
        let r = chart.outer_radius;
        let corner = r * T::from_usize_lossy(m).sqrt();
        if !(corner < chart.geom.domain_radius()) {
            return Err(Error::config("computational box leaves the profile domain"));
        }
        let axis = graded_axis(r, grading, grid_ns)?;
        let axes = vec![axis; m];
        let nt = grid_nt;
        let nn: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let n_tan: usize = nn.iter().product();
        let n_nodes = n_tan * (nt + 1);
        let mut points = Vec::with_capacity(n_nodes * n);
        let mut dirichlet = Vec::with_capacity(n_nodes);
        let mut ti = vec![0usize; m];
        for _ in 0..n_tan {
            let zp: Vec<T> = (0..m).map(|k| axes[k][ti[k]]).collect();
            let lateral = (0..m).any(|k| ti[k] == 0 || ti[k] + 1 == nn[k]);
            for j in 0..=nt {
                let t = T::from_usize_lossy(j) / T::from_usize_lossy(nt);
                let x = chart.neck_inverse(&chart.slab_point(&zp, t))?;
                points.extend_from_slice(&x);
                dirichlet.push(lateral);
            }
            for k in 0..m {
                ti[k] += 1;
                if ti[k] < nn[k] {
                    break;
                }
                ti[k] = 0;
            }
        }

        let mut mesh = Mesh {
            dim: n,
            axes,
            nt,
            points,
            dirichlet,
            simplices: Vec::new(),
            facets: Vec::new(),
            n_cells: 0,
        };
        mesh.triangulate()?;
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn point(&self, node: usize) -> &[T] {
        &self.points[node * self.dim..(node + 1) * self.dim]
    }

    /// Node id from tangential indices and the transverse index.
    pub fn node_id(&self, tan: &[usize], j: usize) -> usize {
        let mut id = 0;
        for k in (0..tan.len()).rev() {
            id = id * self.axes[k].len() + tan[k];
        }
        id * (self.nt + 1) + j
    }

    /// Transverse index of a node.
    pub fn transverse_index(&self, node: usize) -> usize {
        node % (self.nt + 1)
    }

    /// Tangential indices of a node.
    pub fn tangential_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node / (self.nt + 1);
        self.axes
            .iter()
            .map(|a| {
                let i = rest % a.len();
                rest /= a.len();
                i
            })
            .collect()
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.axes.iter().map(|a| a.len() - 1).collect();
        c.push(self.nt);
        c
    }

    fn triangulate(&mut self) -> Result<()> {
        let n = self.dim;
        let cells = self.cells_per_axis();
        let n_cells: usize = cells.iter().product();
        let perms = permutations(n);
        let mut fact = 1usize;
        for k in 2..=n {
            fact *= k;
        }
        let fact_t = T::from_usize_lossy(fact);
        let mut ci = vec![0usize; n];
        for cell in 0..n_cells {
            // reflect local axes in the lower half of each axis
            let flip: Vec<bool> = (0..n).map(|k| 2 * ci[k] < cells[k]).collect();
            for perm in &perms {
                let mut local = vec![0usize; n];
                let mut verts = [0usize; 4];
                for v in 0..=n {
                    if v > 0 {
                        local[perm[v - 1]] = 1;
                    }
                    let idx: Vec<usize> =
                        (0..n).map(|k| ci[k] + if flip[k] { 1 - local[k] } else { local[k] }).collect();
                    verts[v] = self.node_id(&idx[..n - 1], idx[n - 1]);
                }
                let simplex = self.make_simplex(verts, cell, fact_t)?;
                let id = self.simplices.len();
                self.simplices.push(simplex);
                self.collect_facets(id);
            }
            // advance: transverse cell index fastest, then tangential axes
            let order: Vec<usize> = std::iter::once(n - 1).chain(0..n - 1).collect();
            for &k in &order {
                ci[k] += 1;
                if ci[k] < cells[k] {
                    break;
                }
                ci[k] = 0;
            }
        }
        self.n_cells = n_cells;
        Ok(())
    }

    fn make_simplex(&self, verts: [usize; 4], cell: usize, fact: T) -> Result<Simplex<T>> {
        let n = self.dim;
        let x0 = self.point(verts[0]).to_vec();
        let mut e = Mat::zeros(n, n);
        for k in 0..n {
            let xk = self.point(verts[k + 1]);
            for i in 0..n {
                e[(i, k)] = xk[i] - x0[i];
            }
        }
        let det = e.det();
        let inv = e
            .inverse()
            .filter(|_| det != T::zero())
            .ok_or_else(|| Error::GridTooCoarse(format!("degenerate simplex in cell {cell}")))?;
        let mut grad = [[T::zero(); 4]; 3];
        for i in 0..n {
            let mut s = T::zero();
            for k in 0..n {
                grad[i][k + 1] = inv[(k, i)];
                s += inv[(k, i)];
            }
            grad[i][0] = -s;
        }
        Ok(Simplex { verts, grad, vol: det.abs() / fact, cell })
    }

    fn collect_facets(&mut self, id: usize) {
        let n = self.dim;
        let s = &self.simplices[id];
        for (upper, level) in [(true, self.nt), (false, 0)] {
            let on: Vec<usize> = (0..=n).filter(|&v| self.transverse_index(s.verts[v]) == level).collect();
            if on.len() != n {
                continue;
            }
            let opp = (0..=n).find(|v| !on.contains(v)).expect("one vertex off the facet");
            let g: Vec<T> = (0..n).map(|i| s.grad[i][opp]).collect();
            let gn = g.iter().map(|&c| c * c).sum::<T>().sqrt();
            let mut normal = [T::zero(); 3];
            for i in 0..n {
                normal[i] = -g[i] / gn;
            }
            let area = T::from_usize_lossy(n) * s.vol * gn;
            self.facets.push(Facet { simplex: id, area, normal, upper });
        }
    }

    /// Gradient of the P1 interpolant of `values` on simplex `s`.
    pub fn simplex_gradient(&self, s: &Simplex<T>, values: &[T]) -> [T; 3] {
        let mut g = [T::zero(); 3];
        for i in 0..self.dim {
            let mut acc = T::zero();
            for v in 0..=self.dim {
                acc += s.grad[i][v] * values[s.verts[v]];
            }
            g[i] = acc;
        }
        g
    }

    /// Total volume of the mesh.
    pub fn volume(&self) -> T {
        self.simplices.iter().map(|s| s.vol).sum()
    }

    /// Smallest tangential cell width (at x′ = 0).
    pub fn h_min(&self) -> T {
        let a = &self.axes[0];
        let mid = a.len() / 2;
        a[mid + 1] - a[mid]
    }

    pub fn half_width(&self) -> T {
        lit::<T>(0.5) * (self.axes[0][self.axes[0].len() - 1] - self.axes[0][0])
    }
}
