//! The TOML run configuration.

use std::path::Path;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barriers::{BarrierSpec, BarrierVariant};
use crate::error::{Error, Result};
use crate::experiments::{FitWindow, SweepOptions};
use crate::geometry::{make_ball_geometry, make_quadratic_geometry, GapGeometry, Profile};
use crate::linalg::Mat;
use crate::solver::{Dirichlet, SolverConfig};

/// Default ε list of the rate sweeps.
pub const DEFAULT_EPSILONS: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every sampled quantity.
    #[serde(default)]
    pub seed: u64,
    pub geometry: GeometrySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierSection>,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    /// Unit disks (n = 2) or unit balls (n = 3).
    #[serde(alias = "disk", alias = "balls")]
    Disks,
    /// h = ½x′ᵀMx′, either isotropic through `kappa` or with explicit matrices.
    Quadratic,
    /// Radial even polynomials Σ a_k|x′|^{2k}.
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    /// Quadratic form of h₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_matrix: Option<Vec<Vec<f64>>>,
    /// Quadratic form of h₂.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_matrix: Option<Vec<Vec<f64>>>,
    /// a_1, a_2, ... of h₁.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
}

fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub p: f64,
    pub eta: f64,
    pub grid_ns: usize,
    pub grid_nt: usize,
    pub grading: f64,
    pub outer_radius: f64,
    /// Boundary trace as an expression in x1, x2, x3.
    pub dirichlet: String,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub stage_tol: f64,
    /// Explicit [p, eta] stages; empty uses the default schedule.
    pub continuation: Vec<[f64; 2]>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let c = SolverConfig::<f64>::new(2.0);
        SolverSection {
            p: c.p,
            eta: c.eta,
            grid_ns: c.grid_ns,
            grid_nt: c.grid_nt,
            grading: c.grading,
            outer_radius: c.outer_radius,
            dirichlet: "x1".into(),
            newton_tol: c.newton_tol,
            max_newton: c.max_newton,
            stage_tol: c.stage_tol,
            continuation: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    pub window_delta: f64,
    pub auto_resolution: bool,
    /// δ used for the target exponents.
    pub delta: f64,
    pub exclude_largest: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_max: Option<f64>,
    pub use_global: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        let o = SweepOptions::default();
        let w = FitWindow::default();
        SweepSection {
            epsilons: DEFAULT_EPSILONS.to_vec(),
            window_delta: o.window_delta,
            auto_resolution: o.auto_resolution,
            delta: 0.0,
            exclude_largest: w.exclude_largest,
            eps_min: None,
            eps_max: None,
            use_global: w.use_global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub variant: BarrierVariant,
    /// Defaults to the solver's p.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Default to the geometry's curvature bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(default)]
    pub allow_inadmissible: bool,
    /// Bernstein check only.
    #[serde(default = "default_floor_rel")]
    pub floor_rel: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_radius: Option<f64>,
}

fn default_q() -> f64 {
    2.0
}

fn default_samples() -> usize {
    100_000
}

fn default_floor_rel() -> f64 {
    1e-3
}

fn default_rel_tol() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformSection {
    pub radii: Vec<f64>,
    pub r0: f64,
    pub quad_order: usize,
    pub samples: usize,
    /// Defaults to the solver's p.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl Default for TransformSection {
    fn default() -> Self {
        TransformSection { radii: vec![0.05, 0.1, 0.2], r0: 0.25, quad_order: 16, samples: 20_000, p: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), svg: true }
    }
}

impl RunConfig {
    /// Parses TOML; errors carry the dotted key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("at `{path}`: {}", e.into_inner().message()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        self.solver_config()?.validate()?;
        if self.transform.radii.is_empty() || self.transform.quad_order == 0 {
            return Err(Error::config("transform: radii must be non-empty and quad_order positive"));
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, shortest round-trip floats.
    pub fn canonical(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    /// sha256 of the canonical form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn geometry(&self) -> Result<GapGeometry<f64>> {
        let g = &self.geometry;
        let ctx = |msg: String| Error::config(format!("geometry: {msg}"));
        if !(2..=3).contains(&g.dim) {
            return Err(ctx(format!("dim must be 2 or 3, got {}", g.dim)));
        }
        let m = g.dim - 1;
        let mut geom = match g.kind {
            GeometryKind::Disks => make_ball_geometry(g.dim, g.epsilon)?,
            GeometryKind::Quadratic => match (&g.upper_matrix, &g.lower_matrix) {
                (None, None) => make_quadratic_geometry(g.dim, g.epsilon, g.kappa.unwrap_or(1.0))?,
                (Some(u), Some(l)) => {
                    let mu = square(u, m).map_err(|e| ctx(format!("upper_matrix: {e}")))?;
                    let ml = square(l, m).map_err(|e| ctx(format!("lower_matrix: {e}")))?;
                    quadratic_pair(g, mu, ml)?
                }
                _ => return Err(ctx("give both upper_matrix and lower_matrix, or neither".into())),
            },
            GeometryKind::Polynomial => {
                let (Some(u), Some(l)) = (&g.upper_coeffs, &g.lower_coeffs) else {
                    return Err(ctx("polynomial geometry needs upper_coeffs and lower_coeffs".into()));
                };
                if u.is_empty() || l.is_empty() {
                    return Err(ctx("coefficient lists must be non-empty".into()));
                }
                let c1 = g.c1.unwrap_or(u[0] - l[0]);
                // C^{1,1} bound on the unit ball
                let bound = |c: &[f64]| c.iter().enumerate().map(|(k, a)| (2 * k + 2) as f64 * (2 * k + 1) as f64 * a.abs()).sum::<f64>();
                let c2 = g.c2.unwrap_or(bound(u).max(bound(l)));
                GapGeometry::new(g.dim, g.epsilon, Profile::Polynomial(u.clone()), Profile::Polynomial(l.clone()), c1, c2)?
            }
        };
        if g.kind != GeometryKind::Polynomial {
            if let Some(c1) = g.c1 {
                geom.c1 = c1;
            }
            if let Some(c2) = g.c2 {
                geom.c2 = c2;
            }
        }
        match (g.kappa1, g.kappa2) {
            (Some(k1), Some(k2)) => geom = geom.with_kappa(k1, k2)?,
            (None, None) => {}
            _ => return Err(ctx("give both kappa1 and kappa2, or neither".into())),
        }
        if !(geom.c1 > 0.0 && geom.c2 > 0.0) {
            return Err(ctx(format!("c1 and c2 must be positive, got {} and {}", geom.c1, geom.c2)));
        }
        Ok(geom)
    }

    pub fn solver_config(&self) -> Result<SolverConfig<f64>> {
        let s = &self.solver;
        let mut c = SolverConfig::new(s.p);
        c.eta = s.eta;
        c.grid_ns = s.grid_ns;
        c.grid_nt = s.grid_nt;
        c.grading = s.grading;
        c.outer_radius = s.outer_radius;
        c.dirichlet = dirichlet(&s.dirichlet, self.geometry.dim)?;
        c.newton_tol = s.newton_tol;
        c.max_newton = s.max_newton;
        c.stage_tol = s.stage_tol;
        c.continuation = s.continuation.iter().map(|st| (st[0], st[1])).collect();
        c.validate()?;
        Ok(c)
    }

    pub fn sweep_options(&self, workers: Option<usize>) -> SweepOptions {
        SweepOptions { window_delta: self.sweep.window_delta, auto_resolution: self.sweep.auto_resolution, workers }
    }

    pub fn fit_window(&self) -> FitWindow {
        FitWindow {
            exclude_largest: self.sweep.exclude_largest,
            eps_min: self.sweep.eps_min,
            eps_max: self.sweep.eps_max,
            use_global: self.sweep.use_global,
        }
    }

    /// The barrier spec, unvalidated; `Ok(None)` without a [barrier] section.
    pub fn barrier_spec(&self) -> Result<Option<BarrierSpec<f64>>> {
        let Some(b) = &self.barrier else {
            return Ok(None);
        };
        let geom = self.geometry()?;
        let (gk1, gk2) = geom.kappa.unwrap_or((1.0, 1.0));
        let (k1, k2) = (b.kappa1.unwrap_or(gk1), b.kappa2.unwrap_or(gk2));
        let p = b.p.unwrap_or(self.solver.p);
        let (n, eps) = (geom.dim, geom.epsilon);
        Ok(Some(match b.variant {
            BarrierVariant::SupersolutionV => BarrierSpec::supersolution_unchecked(n, p, b.delta, b.gamma, k1, k2, eps),
            BarrierVariant::SubsolutionW => BarrierSpec::subsolution_unchecked(p, b.delta, b.gamma, eps),
            BarrierVariant::BernsteinF => BarrierSpec::bernstein(n, p, b.beta, k1, k2, eps),
            BarrierVariant::AppendixF => BarrierSpec::appendix(n, p, b.a, b.q, k1, k2, eps),
        }))
    }
}

fn square(rows: &[Vec<f64>], m: usize) -> std::result::Result<Mat<f64>, String> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(format!("must be {m}x{m}"));
    }
    let a = Mat::from_rows(rows);
    for i in 0..m {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * (1.0 + a[(i, j)].abs()) {
                return Err("must be symmetric".into());
            }
        }
    }
    Ok(a)
}

/// h₁ − h₂ = ½x′ᵀ(M₁ − M₂)x′ gives c₁; κ's are the eigenvalue range of M₁ and −M₂.
fn quadratic_pair(g: &GeometrySection, mu: Mat<f64>, ml: Mat<f64>) -> Result<GapGeometry<f64>> {
    let diff = mu.add(&ml.scale(-1.0)).sym_eigenvalues();
    let c1 = g.c1.unwrap_or(0.5 * diff[0]);
    let eu = mu.sym_eigenvalues();
    let el = ml.scale(-1.0).sym_eigenvalues();
    let spec = |e: &[f64]| e.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c2 = g.c2.unwrap_or(spec(&eu).max(spec(&el)));
    let geom = GapGeometry::new(g.dim, g.epsilon, Profile::Quadratic(mu), Profile::Quadratic(ml), c1, c2)?;
    let (k1, k2) = (eu[0].min(el[0]), eu[eu.len() - 1].max(el[el.len() - 1]));
    if k1 > 0.0 {
        geom.with_kappa(k1, k2)
    } else {
        Ok(geom)
    }
}

const VARS: [&str; 3] = ["x1", "x2", "x3"];

fn eval_expr(node: &Node<DefaultNumericTypes>, x: &[f64]) -> std::result::Result<f64, String> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (name, &v) in VARS.iter().zip(x) {
        ctx.set_value((*name).into(), Value::Float(v)).map_err(|e| e.to_string())?;
    }
    node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
}

/// Boundary data from a closed-form expression in x1..x_dim.
pub fn dirichlet(expr: &str, dim: usize) -> Result<Dirichlet> {
    let e = expr.trim();
    if e == "x1" {
        return Ok(Dirichlet::X1);
    }
    let node = build_operator_tree::<DefaultNumericTypes>(e)
        .map_err(|err| Error::config(format!("at `solver.dirichlet`: cannot parse {e:?}: {err}")))?;
    for probe in [[0.1, -0.2, 0.3], [-0.3, 0.05, -0.1]] {
        let v = eval_expr(&node, &probe[..dim])
            .map_err(|err| Error::config(format!("at `solver.dirichlet`: {e:?} does not evaluate: {err}")))?;
        if !v.is_finite() {
            return Err(Error::config(format!("at `solver.dirichlet`: {e:?} is not finite at {:?}", &probe[..dim])));
        }
    }
    let node = Arc::new(node);
    Ok(Dirichlet::Expr { label: e.to_string(), f: Arc::new(move |x: &[f64]| eval_expr(&node, x).unwrap_or(f64::NAN)) })
}
