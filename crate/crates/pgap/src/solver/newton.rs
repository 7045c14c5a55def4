use std::sync::Arc;

use super::config::SolverConfig;
use super::energy::{Assembler, HessianKind};
use super::field::{gradient_field, DiscreteField, SolveReport, StageRecord};
use super::linear::SparseLdl;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::geometry::GapGeometry;
use crate::scalar::{dot, lit, norm, Scalar};
use crate::transforms::NeckChart;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-10;

enum Step<T> {
    Accepted { change: T },
    /// No decrease possible above rounding level.
    Stalled,
    Failed(String),
}

struct Stage<'a, T: Scalar> {
    asm: &'a Assembler<T>,
    ldl: &'a mut SparseLdl<T>,
    p: T,
    eta: T,
}

impl<T: Scalar> Stage<'_, T> {
    fn direction(&mut self, u: &[T], grad: &[T], kind: HessianKind, hess: Option<sprs::CsMat<T>>) -> Option<Vec<T>> {
        let hess = match hess {
            Some(h) => h,
            None => self.asm.assemble(u, self.p, self.eta, kind).ok()?.hess,
        };
        self.ldl.factor(&hess).ok()?;
        let mut d = self.ldl.solve(grad).ok()?;
        d.iter_mut().for_each(|v| *v = -*v);
        Some(d)
    }

    /// Backtracking on the accurately computed energy change; returns the new
    /// iterate and the (negative) change.
    fn line_search(&self, u: &[T], d: &[T], slope: T) -> Result<Option<(Vec<T>, T)>> {
        let mut t = T::one();
        let min = lit::<T>(MIN_STEP);
        while t >= min {
            let trial: Vec<T> = u.iter().zip(d).map(|(&a, &b)| a + t * b).collect();
            match self.asm.energy_change(u, &trial, self.p, self.eta) {
                Ok(dj) if dj < T::zero() && dj <= lit::<T>(ARMIJO) * t * slope => return Ok(Some((trial, dj))),
                Ok(_) | Err(Error::NonFinite { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= lit(0.5);
        }
        Ok(None)
    }

    fn step(&mut self, u: &mut Vec<T>, energy: T, grad: &[T], hess: sprs::CsMat<T>, picard: &mut usize) -> Result<Step<T>> {
        let rounding = lit::<T>(1e-14) * (T::one() + energy.abs());
        let mut tried_picard = false;
        let mut d = self.direction(u, grad, HessianKind::Newton, Some(hess));
        if !d.as_ref().is_some_and(|d| dot(grad, d) < T::zero()) {
            tried_picard = true;
            *picard += 1;
            d = self.direction(u, grad, HessianKind::Picard, None);
        }
        loop {
            let Some(dir) = d.as_ref() else {
                return Ok(Step::Failed("no descent direction".into()));
            };
            let slope = dot(grad, dir);
            if !(slope < T::zero()) {
                return Ok(Step::Failed("search direction is not a descent direction".into()));
            }
            if let Some((trial, dj)) = self.line_search(u, dir, slope)? {
                *u = trial;
                return Ok(Step::Accepted { change: dj });
            }
            if -slope <= rounding {
                return Ok(Step::Stalled);
            }
            if tried_picard {
                return Ok(Step::Failed("line search failed".into()));
            }
            tried_picard = true;
            *picard += 1;
            d = self.direction(u, grad, HessianKind::Picard, None);
        }
    }
}

/// Minimizes the discrete energy with damped Newton steps along the (p, η)
/// continuation schedule.
///
/// Running out of iterations is not an error: the best iterate comes back with
/// `report.converged == false` and a message. Factorization or evaluation
/// failures are errors.
pub fn solve<T: Scalar>(geom: &GapGeometry<T>, cfg: &SolverConfig<T>) -> Result<DiscreteField<T>> {
    cfg.validate()?;
    let chart = NeckChart::centered(geom.clone(), cfg.outer_radius)?;
    let mesh = Arc::new(Mesh::build(&chart, cfg.grid_ns, cfg.grid_nt, cfg.grading)?);
    let phi = |x: &[T]| {
        let xf: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        lit::<T>(cfg.dirichlet.eval(&xf))
    };
    let mut field = DiscreteField::from_fn(chart, mesh.clone(), cfg, phi)?;
    let asm = Assembler::new(mesh);
    let mut ldl = SparseLdl::new();
    let mut u = std::mem::take(&mut field.values);
    let mut report = SolveReport { converged: true, ..Default::default() };
    let schedule = cfg.schedule();
    let last = schedule.len() - 1;

    for (k, &(p, eta)) in schedule.iter().enumerate() {
        let tol = if k == last { cfg.newton_tol } else { cfg.stage_tol };
        let mut rec = StageRecord { p: p.to_f64_lossy(), eta: eta.to_f64_lossy(), ..Default::default() };
        let mut stage = Stage { asm: &asm, ldl: &mut ldl, p, eta };
        let mut failure = None;
        let mut level = T::zero();
        loop {
            let ev = asm.assemble(&u, p, eta, HessianKind::Newton)?;
            let gnorm = norm(&ev.grad);
            if rec.energies.is_empty() {
                level = ev.energy;
                rec.energies.push(level.to_f64_lossy());
            }
            rec.grad_norm = gnorm.to_f64_lossy();
            report.energy = ev.energy.to_f64_lossy();
            if gnorm <= tol * (T::one() + ev.energy.abs()) {
                rec.converged = true;
                break;
            }
            if rec.iterations == cfg.max_newton {
                failure = Some(format!("no convergence in {} Newton iterations, gradient norm {:e}", cfg.max_newton, gnorm.to_f64_lossy()));
                break;
            }
            rec.iterations += 1;
            match stage.step(&mut u, ev.energy, &ev.grad, ev.hess, &mut rec.picard_steps)? {
                Step::Accepted { change } => {
                    level += change;
                    rec.energies.push(level.to_f64_lossy());
                }
                Step::Stalled => {
                    rec.converged = true;
                    rec.rounding_stop = true;
                    break;
                }
                Step::Failed(msg) => {
                    failure = Some(msg);
                    break;
                }
            }
        }
        field.values = u.clone();
        rec.max_grad = gradient_field(&field).max.to_f64_lossy();
        report.iterations += rec.iterations;
        report.grad_norm = rec.grad_norm;
        report.stages.push(rec);
        if let Some(reason) = failure {
            let err = Error::NoConvergence { stage: k, p: p.to_f64_lossy(), eta: eta.to_f64_lossy(), reason };
            report.converged = false;
            report.message = Some(err.to_string());
            break;
        }
    }
    field.values = u;
    field.report = report;
    Ok(field)
}

impl<T: Scalar> DiscreteField<T> {
    /// Turns a flagged non-converged field into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.report.converged {
            return Ok(self);
        }
        let st = self.report.stages.last();
        Err(Error::NoConvergence {
            stage: self.report.stages.len().saturating_sub(1),
            p: st.map_or(f64::NAN, |s| s.p),
            eta: st.map_or(f64::NAN, |s| s.eta),
            reason: self.report.message.clone().unwrap_or_default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_disk_geometry;

    #[test]
    fn linear_case_converges_in_one_step() {
        let g = make_disk_geometry(1e-2f64).unwrap();
        let mut cfg = SolverConfig::new(2.0);
        cfg.grid_ns = 16;
        cfg.grid_nt = 8;
        let f = solve(&g, &cfg).unwrap();
        assert!(f.report.converged);
        assert!(f.report.iterations <= 2);
    }

    #[test]
    fn continuation_energies_decrease() {
        let g = make_disk_geometry(1e-2f64).unwrap();
        let mut cfg = SolverConfig::new(3.0);
        cfg.grid_ns = 16;
        cfg.grid_nt = 8;
        let f = solve(&g, &cfg).unwrap();
        assert!(f.report.converged, "{:?}", f.report.message);
        for st in &f.report.stages {
            assert!(st.energies.windows(2).all(|w| w[1] <= w[0]));
        }
        assert_eq!(f.report.stages.last().unwrap().p, 3.0);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let g = make_disk_geometry(1e-2f64).unwrap();
        let mut cfg = SolverConfig::new(4.0);
        cfg.grid_ns = 16;
        cfg.grid_nt = 8;
        cfg.max_newton = 1;
        cfg.newton_tol = 1e-14;
        let f = solve(&g, &cfg).unwrap();
        assert!(!f.report.converged);
        assert!(f.report.message.is_some());
        assert!(matches!(f.require_converged(), Err(Error::NoConvergence { .. })));
    }
}
