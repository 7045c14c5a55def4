use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Closed-form boundary trace.
pub type TraceFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary trace on the lateral boundary, evaluated at physical points.
#[derive(Clone)]
pub enum Dirichlet {
    /// φ = x₁.
    X1,
    Expr { label: String, f: TraceFn },
}

impl Dirichlet {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Dirichlet::X1 => x[0],
            Dirichlet::Expr { f, .. } => f(x),
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Dirichlet::X1 => "x1",
            Dirichlet::Expr { label, .. } => label,
        }
    }
}

impl fmt::Debug for Dirichlet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dirichlet({})", self.label())
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig<T: Scalar> {
    pub p: T,
    pub eta: T,
    /// Tangential cells per axis (even; half on each side of x′ = 0).
    pub grid_ns: usize,
    /// Transverse cells.
    pub grid_nt: usize,
    /// Geometric growth ratio of tangential cells away from x′ = 0.
    pub grading: T,
    pub outer_radius: T,
    pub dirichlet: Dirichlet,
    pub newton_tol: T,
    /// Newton iterations allowed per continuation stage.
    pub max_newton: usize,
    /// (p, η) stages; empty means the default geometric schedule.
    pub continuation: Vec<(T, T)>,
    /// Relative gradient tolerance for the intermediate stages.
    pub stage_tol: T,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn new(p: T) -> Self {
        SolverConfig {
            p,
            eta: lit(1e-10),
            grid_ns: 64,
            grid_nt: 16,
            grading: lit(1.05),
            outer_radius: lit(0.5),
            dirichlet: Dirichlet::X1,
            newton_tol: lit(1e-10),
            max_newton: 60,
            continuation: Vec::new(),
            stage_tol: lit(1e-6),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one()) {
            return Err(Error::config(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.eta >= T::zero()) {
            return Err(Error::config("eta must be nonnegative"));
        }
        if self.grid_ns < 8 || self.grid_nt < 8 {
            return Err(Error::config(format!(
                "grid_ns and grid_nt must be at least 8, got {} and {}",
                self.grid_ns, self.grid_nt
            )));
        }
        if !self.grid_ns.is_multiple_of(2) || !self.grid_nt.is_multiple_of(2) {
            return Err(Error::config("grid_ns and grid_nt must be even"));
        }
        if !(self.newton_tol > T::zero()) || !(self.stage_tol > T::zero()) {
            return Err(Error::config("newton_tol and stage_tol must be positive"));
        }
        if self.max_newton == 0 {
            return Err(Error::config("max_newton must be positive"));
        }
        if !(self.grading >= T::one()) {
            return Err(Error::config("grading ratio must be at least 1"));
        }
        if !(self.outer_radius > T::zero() && self.outer_radius <= lit(0.5)) {
            return Err(Error::config("outer_radius must lie in (0, 1/2]"));
        }
        if let Some(&(p, eta)) = self.continuation.last() {
            if p != self.p || eta != self.eta {
                return Err(Error::config("continuation schedule must end at the target (p, eta)"));
            }
            if self.continuation.iter().any(|&(p, e)| !(p > T::one()) || !(e >= T::zero())) {
                return Err(Error::config("continuation stages need p > 1 and eta >= 0"));
            }
        }
        Ok(())
    }

    /// Stages actually run: the explicit schedule, or geometric steps from
    /// (2, 1e−2) to the target.
    pub fn schedule(&self) -> Vec<(T, T)> {
        if !self.continuation.is_empty() {
            return self.continuation.clone();
        }
        let two = lit::<T>(2.0);
        let eta0 = lit::<T>(1e-2);
        if self.p == two && self.eta <= eta0 {
            // the quadratic energy has the same minimizer for every eta
            return vec![(self.p, self.eta)];
        }
        let p_steps = ((self.p / two).ln().abs() / lit::<T>(1.25).ln()).ceil();
        let e_steps = if self.eta > T::zero() { ((eta0 / self.eta).ln().abs() / lit::<T>(10.0).ln()).ceil() } else { lit(4.0) };
        let k = p_steps.max(e_steps / lit(2.0)).max(lit(2.0)).to_usize().unwrap_or(4);
        let kt = T::from_usize_lossy(k);
        let eta_end = if self.eta > T::zero() { self.eta } else { lit(1e-12) };
        let mut out: Vec<(T, T)> = (0..=k)
            .map(|i| {
                let s = T::from_usize_lossy(i) / kt;
                let p = two * (self.p / two).powf(s);
                let eta = eta0 * (eta_end / eta0).powf(s);
                (p, eta)
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = (self.p, self.eta);
        }
        out
    }
}
