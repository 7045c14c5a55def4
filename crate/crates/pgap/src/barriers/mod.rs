//! Explicit barriers for the comparison arguments and the quantities of the
//! Bernstein-type gradient bounds.

mod bernstein;
mod certify;
mod comparison;

pub use bernstein::{
    bernstein_eval, chart_gradient, measure_kappa, BernsteinOptions, BernsteinReport, BoundCheck, BoundarySample,
};
pub use certify::{
    certify_sign, certify_sign_with, cone_opening, hessian_radius, sign_radius, CertificateReport, CertifyOptions,
    SignViolation,
};
pub use comparison::{comparison_fit, ComparisonFit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierVariant {
    /// v = (|x′|² + (2+δ)x_n²)^{γ/2}, supersolution for p > n + 1.
    SupersolutionV,
    /// w = [(x₁² + (2−δ)x₂²)^{γ/2} − (4√(ε/δ))^γ]₊ in two dimensions.
    SubsolutionW,
    /// F = Q^{(p−pγ)/2}|Du|^p (p ≥ 2) or G = Q^{1−γ}|Du|² (1 < p < 2).
    BernsteinF,
    /// F = Q|Du|² + Au² with Q = ε + |x′|² − 4κ₂²x_n²/κ₁.
    AppendixF,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec<T: Scalar> {
    pub variant: BarrierVariant,
    pub n: usize,
    pub p: T,
    pub delta: T,
    pub gamma: T,
    /// Bernstein exponent; γ = 2β for that variant.
    pub beta: T,
    pub a: T,
    pub q: T,
    pub kappa1: T,
    pub kappa2: T,
    pub epsilon: T,
}

/// Value, gradient and div(|D·|^{p−2}D·) of a barrier at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierEval<T> {
    pub value: T,
    pub gradient: Vec<T>,
    pub divergence: T,
}

/// Upper bound of γ for the supersolution: (p − n − 1 − δ)/(p − 1).
pub fn v_gamma_bound<T: Scalar>(n: usize, p: T, delta: T) -> T {
    (p - T::from_usize_lossy(n + 1) - delta) / (p - T::one())
}

/// Lower bound of γ for the subsolution: max{(p − 3 + δ)/(p − 1), 0}.
pub fn w_gamma_bound<T: Scalar>(p: T, delta: T) -> T {
    ((p - lit(3.0) + delta) / (p - T::one())).max(T::zero())
}

/// Dimension thresholds under which the Bernstein argument applies.
pub fn np_relation_holds<T: Scalar>(n: usize, p: T, beta: T, kappa1: T, kappa2: T) -> bool {
    let nn = T::from_usize_lossy(n);
    let two = lit::<T>(2.0);
    let k = kappa2 / ((T::one() - two * beta) * kappa1);
    if p >= two {
        let need = lit::<T>(2.5) * (p - T::one()) * ((p + T::one() - two * beta * (p - T::one())) / two + k) + T::one();
        nn >= need
    } else {
        let need = lit::<T>(2.5) * ((lit::<T>(3.0) - two * beta) / two + k) + lit(3.0) - p;
        nn >= need
    }
}

impl<T: Scalar> BarrierSpec<T> {
    fn base(variant: BarrierVariant, n: usize, p: T, epsilon: T) -> Self {
        BarrierSpec {
            variant,
            n,
            p,
            delta: T::zero(),
            gamma: T::zero(),
            beta: T::zero(),
            a: T::zero(),
            q: lit(2.0),
            kappa1: T::one(),
            kappa2: T::one(),
            epsilon,
        }
    }

    /// Supersolution spec without the admissibility check (for probing
    /// parameters outside the admissible range).
    pub fn supersolution_unchecked(n: usize, p: T, delta: T, gamma: T, kappa1: T, kappa2: T, epsilon: T) -> Self {
        BarrierSpec { delta, gamma, kappa1, kappa2, ..Self::base(BarrierVariant::SupersolutionV, n, p, epsilon) }
    }

    pub fn supersolution(n: usize, p: T, delta: T, gamma: T, kappa1: T, kappa2: T, epsilon: T) -> Result<Self> {
        let s = Self::supersolution_unchecked(n, p, delta, gamma, kappa1, kappa2, epsilon);
        s.validate()?;
        Ok(s)
    }

    pub fn subsolution_unchecked(p: T, delta: T, gamma: T, epsilon: T) -> Self {
        BarrierSpec { delta, gamma, ..Self::base(BarrierVariant::SubsolutionW, 2, p, epsilon) }
    }

    pub fn subsolution(p: T, delta: T, gamma: T, epsilon: T) -> Result<Self> {
        let s = Self::subsolution_unchecked(p, delta, gamma, epsilon);
        s.validate()?;
        Ok(s)
    }

    /// Bernstein quantity with γ = 2β. Evaluation on two- and three-dimensional
    /// fields is exploratory: the dimension thresholds are not checked here,
    /// see [`BarrierSpec::validate`].
    pub fn bernstein(n: usize, p: T, beta: T, kappa1: T, kappa2: T, epsilon: T) -> Self {
        BarrierSpec {
            beta,
            gamma: lit::<T>(2.0) * beta,
            kappa1,
            kappa2,
            ..Self::base(BarrierVariant::BernsteinF, n, p, epsilon)
        }
    }

    pub fn appendix(n: usize, p: T, a: T, q: T, kappa1: T, kappa2: T, epsilon: T) -> Self {
        BarrierSpec { a, q, kappa1, kappa2, ..Self::base(BarrierVariant::AppendixF, n, p, epsilon) }
    }

    /// Checks the admissible parameter ranges of the variant.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if !(self.p > T::one()) {
            return bad(format!("p must exceed 1, got {}", self.p));
        }
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return bad(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.kappa1 > T::zero() && self.kappa2 >= self.kappa1) {
            return bad("need 0 < kappa1 <= kappa2".into());
        }
        let nn = T::from_usize_lossy(self.n + 1);
        match self.variant {
            BarrierVariant::SupersolutionV => {
                if !(self.p > nn) {
                    return bad(format!("supersolution needs p > n + 1 = {nn}, got p = {}", self.p));
                }
                if !(self.delta > T::zero() && self.delta < self.p - nn) {
                    return bad(format!("delta must lie in (0, p - n - 1) = (0, {}), got {}", self.p - nn, self.delta));
                }
                let hi = v_gamma_bound(self.n, self.p, self.delta);
                if !(self.gamma > T::zero() && self.gamma < hi) {
                    return bad(format!(
                        "gamma must lie in (0, (p - n - 1 - delta)/(p - 1)) = (0, {hi}), got {}",
                        self.gamma
                    ));
                }
            }
            BarrierVariant::SubsolutionW => {
                if self.n != 2 {
                    return bad("the subsolution is two-dimensional".into());
                }
                if !(self.delta > T::zero() && self.delta < lit(0.5)) {
                    return bad(format!("delta must lie in (0, 1/2), got {}", self.delta));
                }
                let lo = w_gamma_bound(self.p, self.delta);
                if !(self.gamma > lo) {
                    return bad(format!(
                        "gamma must exceed max((p - 3 + delta)/(p - 1), 0) = {lo}, got {}",
                        self.gamma
                    ));
                }
                if !(self.epsilon < self.delta / lit(10.0)) {
                    return bad(format!("epsilon must be below delta/10 = {}", self.delta / lit(10.0)));
                }
            }
            BarrierVariant::BernsteinF => {
                if !(self.beta >= T::zero() && self.beta < lit(0.5)) {
                    return bad(format!("beta must lie in [0, 1/2), got {}", self.beta));
                }
                if self.gamma != lit::<T>(2.0) * self.beta {
                    return bad("gamma must equal 2 beta".into());
                }
                if !np_relation_holds(self.n, self.p, self.beta, self.kappa1, self.kappa2) {
                    return bad(format!(
                        "(n, p, beta) = ({}, {}, {}) violates the dimension threshold",
                        self.n, self.p, self.beta
                    ));
                }
            }
            BarrierVariant::AppendixF => {
                if !(self.a > T::zero() && self.q >= lit(2.0)) {
                    return bad("appendix quantity needs A > 0 and q >= 2".into());
                }
            }
        }
        Ok(())
    }

    /// Anisotropy factor a of R² = |x′|² + a·x_n².
    pub fn anisotropy(&self) -> T {
        match self.variant {
            BarrierVariant::SubsolutionW => lit::<T>(2.0) - self.delta,
            _ => lit::<T>(2.0) + self.delta,
        }
    }

    /// Truncation level (4√(ε/δ))^γ of the subsolution, 0 otherwise.
    pub fn truncation(&self) -> T {
        match self.variant {
            BarrierVariant::SubsolutionW => (lit::<T>(4.0) * (self.epsilon / self.delta).sqrt()).powf(self.gamma),
            _ => T::zero(),
        }
    }

    /// The quartic P(X, Y) with X = |x′|², Y = x_n² such that
    /// div(|Dv|^{p−2}Dv)·|Dv|^{4−p} = γ³R^{3γ−8}·P for v = R^γ.
    pub fn quartic(&self, x: T, y: T) -> T {
        let a = self.anisotropy();
        let two = lit::<T>(2.0);
        let nm1 = T::from_usize_lossy(self.n - 1);
        let r2 = x + a * y;
        let s = x + a * a * y;
        let g2 = self.gamma - two;
        s * ((nm1 + a) * r2 + g2 * s) + (self.p - two) * (r2 * (x + a * a * a * y) + g2 * s * s)
    }

    /// Coefficients (c₀, c₁, c₂) of P(1, Y) = c₀ + c₁Y + c₂Y².
    pub fn quartic_coefficients(&self) -> (T, T, T) {
        let c0 = self.quartic(T::one(), T::zero());
        let p1 = self.quartic(T::one(), T::one());
        let pm = self.quartic(T::one(), -T::one());
        let c2 = (p1 + pm) / lit(2.0) - c0;
        let c1 = (p1 - pm) / lit(2.0);
        (c0, c1, c2)
    }

    /// Leading coefficient P(1, 0): n + δ + (p−1)(γ−1) for v, and
    /// (3 − δ) + (γ − 2) + (p − 2)(γ − 1) for w.
    pub fn leading_coefficient(&self) -> T {
        self.quartic(T::one(), T::zero())
    }
}

fn require_power_barrier<T: Scalar>(spec: &BarrierSpec<T>) -> Result<()> {
    match spec.variant {
        BarrierVariant::SupersolutionV | BarrierVariant::SubsolutionW => Ok(()),
        _ => Err(Error::invariant("the Bernstein quantities depend on a solved field; use bernstein_eval")),
    }
}

/// Closed-form value, gradient and p-Laplace divergence of v or w.
///
/// For w the gradient and divergence vanish on the truncation set. For the
/// Bernstein variants this is an error; they need a field.
pub fn eval_barrier<T: Scalar>(spec: &BarrierSpec<T>, x: &[T]) -> Result<BarrierEval<T>> {
    require_power_barrier(spec)?;
    if x.len() != spec.n {
        return Err(Error::invariant(format!("point has {} components, expected {}", x.len(), spec.n)));
    }
    let (xp, xn) = x.split_at(spec.n - 1);
    let xn = xn[0];
    let a = spec.anisotropy();
    let xx: T = xp.iter().map(|&v| v * v).sum();
    let yy = xn * xn;
    let r2 = xx + a * yy;
    if r2 == T::zero() {
        return Err(Error::invariant("barrier divergence is singular at x = 0"));
    }
    let r = r2.sqrt();
    let g = spec.gamma;
    let cut = spec.truncation();
    let raw = r.powf(g);
    if spec.variant == BarrierVariant::SubsolutionW && raw <= cut {
        return Ok(BarrierEval { value: T::zero(), gradient: vec![T::zero(); spec.n], divergence: T::zero() });
    }
    let two = lit::<T>(2.0);
    let c = g * r.powf(g - two);
    let mut gradient: Vec<T> = xp.iter().map(|&v| c * v).collect();
    gradient.push(c * a * xn);
    let s = xx + a * a * yy;
    // |Dv| = γR^{γ−2}√s, div = |Dv|^{p−4}·γ³R^{3γ−8}·P
    let dv = c * s.sqrt();
    let lit8 = lit::<T>(8.0);
    let divergence = dv.powf(spec.p - lit(4.0)) * g * g * g * r.powf(lit::<T>(3.0) * g - lit8) * spec.quartic(xx, yy);
    Ok(BarrierEval { value: raw - cut, gradient, divergence })
}

/// Flux |Dv|^{p−2}Dv from the closed-form gradient.
pub fn barrier_flux<T: Scalar>(spec: &BarrierSpec<T>, x: &[T]) -> Result<Vec<T>> {
    let e = eval_barrier(spec, x)?;
    let norm = e.gradient.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm == T::zero() {
        return Ok(e.gradient);
    }
    let w = norm.powf(spec.p - lit(2.0));
    Ok(e.gradient.iter().map(|&v| w * v).collect())
}

/// Q of the Bernstein quantity: ε/κ₁ + |x′|² − 5κ₂x_n²/(2(1−γ)κ₁).
pub fn bernstein_q<T: Scalar>(spec: &BarrierSpec<T>, x: &[T]) -> T {
    let (xp, xn) = x.split_at(x.len() - 1);
    let xx: T = xp.iter().map(|&v| v * v).sum();
    let c = lit::<T>(5.0) * spec.kappa2 / (lit::<T>(2.0) * (T::one() - spec.gamma) * spec.kappa1);
    spec.epsilon / spec.kappa1 + xx - c * xn[0] * xn[0]
}

/// Q of the appendix quantity: ε + |x′|² − 4κ₂²x_n²/κ₁.
pub fn appendix_q<T: Scalar>(spec: &BarrierSpec<T>, x: &[T]) -> T {
    let (xp, xn) = x.split_at(x.len() - 1);
    let xx: T = xp.iter().map(|&v| v * v).sum();
    spec.epsilon + xx - lit::<T>(4.0) * spec.kappa2 * spec.kappa2 / spec.kappa1 * xn[0] * xn[0]
}

/// The Bernstein quantity from Q, |Du| and u, dispatching on the variant and p.
pub fn bernstein_quantity<T: Scalar>(spec: &BarrierSpec<T>, q: T, grad_norm: T, u: T) -> T {
    let two = lit::<T>(2.0);
    match spec.variant {
        BarrierVariant::AppendixF => q * grad_norm * grad_norm + spec.a * u * u,
        _ if spec.p >= two => q.max(T::zero()).powf((spec.p - spec.p * spec.gamma) / two) * grad_norm.powf(spec.p),
        _ => q.max(T::zero()).powf(T::one() - spec.gamma) * grad_norm * grad_norm,
    }
}
