//! Inclusion boundaries as graphs over x′ and the gap between them.
//!
//! The upper inclusion boundary is x_n = ε/2 + h₁(x′), the lower one is
//! x_n = −ε/2 + h₂(x′). Both profiles vanish to first order at x′ = 0.

use std::fmt;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{dot, lit, norm_sq, Scalar};

/// User-supplied smooth profile with analytic derivatives.
pub trait ProfileFn<T: Scalar>: Send + Sync {
    fn value(&self, xp: &[T]) -> T;
    fn gradient(&self, xp: &[T]) -> Vec<T>;
    fn hessian(&self, xp: &[T]) -> Mat<T>;
    /// Largest |x′| where the closed form is valid.
    fn domain_radius(&self) -> T {
        T::one()
    }
    fn name(&self) -> String {
        "custom".into()
    }
}

/// A boundary profile h(x′).
#[derive(Clone)]
pub enum Profile<T: Scalar> {
    /// h = ½ x′ᵀ M x′ with symmetric M.
    Quadratic(Mat<T>),
    /// h = s·(1 − √(1 − |x′|²)): unit ball boundary, s = +1 for the upper
    /// inclusion and −1 for the lower one.
    Sphere { sign: T },
    /// Radial even polynomial h = Σ_k a_k |x′|^{2k}, k ≥ 1.
    Polynomial(Vec<T>),
    Custom(Arc<dyn ProfileFn<T>>),
}

impl<T: Scalar> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Quadratic(m) => f.debug_tuple("Quadratic").field(&m.data).finish(),
            Profile::Sphere { sign } => f.debug_struct("Sphere").field("sign", sign).finish(),
            Profile::Polynomial(c) => f.debug_tuple("Polynomial").field(c).finish(),
            Profile::Custom(c) => write!(f, "Custom({})", c.name()),
        }
    }
}

/// Disk profiles are clamped here to stay off the square-root branch point.
pub const SPHERE_DOMAIN: f64 = 0.999;

impl<T: Scalar> Profile<T> {
    /// h = (κ/2)|x′|² in m = n − 1 variables.
    pub fn isotropic_quadratic(m: usize, kappa: T) -> Self {
        Profile::Quadratic(Mat::identity(m).scale(kappa))
    }

    pub fn domain_radius(&self) -> T {
        match self {
            Profile::Sphere { .. } => lit(SPHERE_DOMAIN),
            Profile::Custom(c) => c.domain_radius(),
            _ => T::infinity(),
        }
    }

    pub fn value(&self, xp: &[T]) -> T {
        match self {
            Profile::Quadratic(m) => lit::<T>(0.5) * dot(xp, &m.mul_vec(xp)),
            Profile::Sphere { sign } => *sign * (T::one() - (T::one() - norm_sq(xp)).sqrt()),
            Profile::Polynomial(c) => {
                let rho2 = norm_sq(xp);
                let mut acc = T::zero();
                let mut pw = rho2;
                for &a in c {
                    acc += a * pw;
                    pw *= rho2;
                }
                acc
            }
            Profile::Custom(c) => c.value(xp),
        }
    }

    pub fn gradient(&self, xp: &[T]) -> Vec<T> {
        match self {
            Profile::Quadratic(m) => m.mul_vec(xp),
            Profile::Sphere { sign } => {
                let s = (T::one() - norm_sq(xp)).sqrt();
                xp.iter().map(|&x| *sign * x / s).collect()
            }
            Profile::Polynomial(c) => {
                let f = radial_derivative_factor(c, norm_sq(xp));
                xp.iter().map(|&x| f * x).collect()
            }
            Profile::Custom(c) => c.gradient(xp),
        }
    }

    pub fn hessian(&self, xp: &[T]) -> Mat<T> {
        let m = xp.len();
        match self {
            Profile::Quadratic(mat) => mat.clone(),
            Profile::Sphere { sign } => {
                let s2 = T::one() - norm_sq(xp);
                let s = s2.sqrt();
                let mut h = Mat::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        let diag = if i == j { T::one() / s } else { T::zero() };
                        h[(i, j)] = *sign * (diag + xp[i] * xp[j] / (s2 * s));
                    }
                }
                h
            }
            Profile::Polynomial(c) => {
                let rho2 = norm_sq(xp);
                let f = radial_derivative_factor(c, rho2);
                // d/d(rho2) of f, times 2 for the outer product term
                let mut fp = T::zero();
                let mut pw = T::one();
                for (k, &a) in c.iter().enumerate().skip(1) {
                    let kk = T::from_usize_lossy(k + 1);
                    fp += lit::<T>(2.0) * kk * (kk - T::one()) * a * pw;
                    pw *= rho2;
                }
                let mut h = Mat::zeros(m, m);
                for i in 0..m {
                    for j in 0..m {
                        let diag = if i == j { f } else { T::zero() };
                        h[(i, j)] = diag + lit::<T>(2.0) * fp * xp[i] * xp[j];
                    }
                }
                h
            }
            Profile::Custom(c) => c.hessian(xp),
        }
    }

    pub fn kind(&self) -> String {
        match self {
            Profile::Quadratic(_) => "quadratic".into(),
            Profile::Sphere { .. } => "disk".into(),
            Profile::Polynomial(_) => "polynomial".into(),
            Profile::Custom(c) => c.name(),
        }
    }
}

/// For h = Σ a_k ρ^{2k}, ∇h = f(ρ²)·x′ with f = Σ 2k a_k ρ^{2k−2}.
fn radial_derivative_factor<T: Scalar>(c: &[T], rho2: T) -> T {
    let mut f = T::zero();
    let mut pw = T::one();
    for (k, &a) in c.iter().enumerate() {
        f += lit::<T>(2.0) * T::from_usize_lossy(k + 1) * a * pw;
        pw *= rho2;
    }
    f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
}

/// Two inclusion boundaries at distance ε over the ambient dimension `dim`.
#[derive(Debug, Clone)]
pub struct GapGeometry<T: Scalar> {
    pub dim: usize,
    pub epsilon: T,
    pub h_upper: Profile<T>,
    pub h_lower: Profile<T>,
    pub c1: T,
    pub c2: T,
    pub kappa: Option<(T, T)>,
}

impl<T: Scalar> GapGeometry<T> {
    pub fn new(dim: usize, epsilon: T, h_upper: Profile<T>, h_lower: Profile<T>, c1: T, c2: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config(format!("dimension must be at least 2, got {dim}")));
        }
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(c1 > T::zero() && c2 > T::zero()) {
            return Err(Error::config("c1 and c2 must be positive"));
        }
        for (name, h) in [("h_upper", &h_upper), ("h_lower", &h_lower)] {
            if let Profile::Quadratic(m) = h {
                if m.rows != dim - 1 || m.cols != dim - 1 {
                    return Err(Error::config(format!(
                        "{name}: quadratic form must be {0}x{0}, got {1}x{2}",
                        dim - 1,
                        m.rows,
                        m.cols
                    )));
                }
            }
        }
        Ok(GapGeometry { dim, epsilon, h_upper, h_lower, c1, c2, kappa: None })
    }

    pub fn with_kappa(mut self, kappa1: T, kappa2: T) -> Result<Self> {
        if !(kappa1 > T::zero() && kappa2 >= kappa1) {
            return Err(Error::config("need 0 < kappa1 <= kappa2"));
        }
        self.kappa = Some((kappa1, kappa2));
        Ok(self)
    }

    pub fn with_epsilon(&self, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let mut g = self.clone();
        g.epsilon = epsilon;
        Ok(g)
    }

    /// Profiles are graphs over x′ ∈ ℝ^{n−1}.
    pub fn tangential_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn domain_radius(&self) -> T {
        self.h_upper.domain_radius().min(self.h_lower.domain_radius())
    }

    fn profile(&self, side: Side) -> &Profile<T> {
        match side {
            Side::Upper => &self.h_upper,
            Side::Lower => &self.h_lower,
        }
    }

    pub fn check_domain(&self, xp: &[T]) -> Result<()> {
        if xp.len() != self.tangential_dim() {
            return Err(Error::invariant(format!(
                "x' has {} components, geometry expects {}",
                xp.len(),
                self.tangential_dim()
            )));
        }
        let r = norm_sq(xp).sqrt();
        if !(r <= self.domain_radius()) {
            return Err(Error::OutsideDomain { radius: r.to_f64_lossy() });
        }
        Ok(())
    }

    /// ε/2 + h₁(x′).
    pub fn upper_surface(&self, xp: &[T]) -> T {
        self.epsilon * lit(0.5) + self.h_upper.value(xp)
    }

    /// −ε/2 + h₂(x′).
    pub fn lower_surface(&self, xp: &[T]) -> T {
        -self.epsilon * lit(0.5) + self.h_lower.value(xp)
    }

    /// ε + h₁(x′) − h₂(x′).
    pub fn gap_width(&self, xp: &[T]) -> T {
        self.epsilon + self.h_upper.value(xp) - self.h_lower.value(xp)
    }

    /// Whether x lies in the closed gap and inside the profile domain.
    pub fn contains(&self, x: &[T]) -> bool {
        let (xp, xn) = x.split_at(self.dim - 1);
        self.check_domain(xp).is_ok() && xn[0] >= self.lower_surface(xp) && xn[0] <= self.upper_surface(xp)
    }

    /// Unit normal on Γ₊ (upper) or Γ₋ (lower) pointing into the inclusion,
    /// away from the gap: (−∇h₁, 1)/√(1+|∇h₁|²) on Γ₊ and (∇h₂, −1)/√(1+|∇h₂|²) on Γ₋.
    pub fn inner_normal(&self, side: Side, xp: &[T]) -> Result<Vec<T>> {
        self.check_domain(xp)?;
        let grad = self.profile(side).gradient(xp);
        let scale = (T::one() + norm_sq(&grad)).sqrt();
        let s = match side {
            Side::Upper => T::one(),
            Side::Lower => -T::one(),
        };
        let mut nu: Vec<T> = grad.iter().map(|&g| -s * g / scale).collect();
        nu.push(s / scale);
        Ok(nu)
    }

    /// Sample-based estimates of the standing constants on |x′| ≤ radius.
    pub fn validate_hypotheses(&self, samples: usize, radius: T, seed: u64) -> Result<HypothesisReport> {
        if samples < 100 {
            return Err(Error::config(format!("validate_hypotheses needs at least 100 samples, got {samples}")));
        }
        if !(radius > T::zero() && radius <= self.domain_radius()) {
            return Err(Error::config(format!("validation radius {radius} outside the profile domain")));
        }
        let pts = sample_ball(self.tangential_dim(), radius.to_f64_lossy(), samples, seed);
        let mut rep = HypothesisReport {
            radius: radius.to_f64_lossy(),
            samples: pts.len(),
            c1_est: f64::INFINITY,
            c2_est: 0.0,
            kappa1_est: f64::INFINITY,
            kappa2_est: f64::NEG_INFINITY,
            violations: Vec::new(),
        };
        let tol = 1e-10;
        let zero = vec![T::zero(); self.tangential_dim()];
        for (name, h) in [("h_upper", &self.h_upper), ("h_lower", &self.h_lower)] {
            let v = h.value(&zero).to_f64_lossy();
            let g = norm_sq(&h.gradient(&zero)).sqrt().to_f64_lossy();
            if v.abs() > tol || g > tol {
                rep.violations.push(Violation {
                    hypothesis: "fg_0".into(),
                    point: vec![0.0; self.tangential_dim()],
                    detail: format!("{name}(0) = {v:e}, |grad {name}(0)| = {g:e}"),
                });
            }
        }
        let mut sup = [[0.0f64; 3]; 2];
        for p in &pts {
            let xp: Vec<T> = p.iter().map(|&c| T::lit(c)).collect();
            let r2 = p.iter().map(|c| c * c).sum::<f64>();
            let diff = (self.h_upper.value(&xp) - self.h_lower.value(&xp)).to_f64_lossy();
            if r2 > 0.0 {
                rep.c1_est = rep.c1_est.min(diff / r2);
                if diff < self.c1.to_f64_lossy() * r2 * (1.0 - 1e-12) - 1e-15 {
                    rep.violations.push(Violation {
                        hypothesis: "fg_1".into(),
                        point: p.clone(),
                        detail: format!("h1 - h2 = {diff:e} < c1 |x'|^2 = {:e}", self.c1.to_f64_lossy() * r2),
                    });
                }
            }
            for (k, h) in [&self.h_upper, &self.h_lower].into_iter().enumerate() {
                sup[k][0] = sup[k][0].max(h.value(&xp).to_f64_lossy().abs());
                sup[k][1] = sup[k][1].max(norm_sq(&h.gradient(&xp)).sqrt().to_f64_lossy());
                let hess = h.hessian(&xp);
                let ev = hess.sym_eigenvalues();
                let spec = ev.iter().fold(0.0f64, |a, &e| a.max(e.to_f64_lossy().abs()));
                sup[k][2] = sup[k][2].max(spec);
                // convexity of h1, concavity of h2
                let sign = if k == 0 { 1.0 } else { -1.0 };
                let lo = ev.iter().map(|&e| sign * e.to_f64_lossy()).fold(f64::INFINITY, f64::min);
                let hi = ev.iter().map(|&e| sign * e.to_f64_lossy()).fold(f64::NEG_INFINITY, f64::max);
                rep.kappa1_est = rep.kappa1_est.min(lo);
                rep.kappa2_est = rep.kappa2_est.max(hi);
                if let Some((k1, k2)) = self.kappa {
                    let (k1, k2) = (k1.to_f64_lossy(), k2.to_f64_lossy());
                    if lo < k1 * (1.0 - 1e-9) || hi > k2 * (1.0 + 1e-9) {
                        rep.violations.push(Violation {
                            hypothesis: "fg_convex".into(),
                            point: p.clone(),
                            detail: format!(
                                "{} Hessian spectrum [{lo:.6e}, {hi:.6e}] outside [{k1}, {k2}]",
                                if k == 0 { "h1" } else { "-h2" }
                            ),
                        });
                    }
                }
            }
        }
        rep.c2_est = sup.iter().map(|s| s.iter().sum::<f64>()).fold(0.0, f64::max);
        if rep.c2_est > self.c2.to_f64_lossy() * (1.0 + 1e-12) {
            rep.violations.push(Violation {
                hypothesis: "c2".into(),
                point: Vec::new(),
                detail: format!("C^1,1 norm estimate {:e} exceeds c2 = {}", rep.c2_est, self.c2),
            });
        }
        Ok(rep)
    }
}

impl GapGeometry<f64> {
    /// Short descriptor used in manifests and containers.
    pub fn descriptor(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "epsilon": self.epsilon,
            "h_upper": format!("{:?}", self.h_upper),
            "h_lower": format!("{:?}", self.h_lower),
            "c1": self.c1,
            "c2": self.c2,
            "kappa": self.kappa,
        })
    }
}

/// Two unit balls at distance ε in dimension 2: h₁ = 1 − √(1 − x₁²), h₂ = −h₁.
pub fn make_disk_geometry<T: Scalar>(epsilon: T) -> Result<GapGeometry<T>> {
    make_ball_geometry(2, epsilon)
}

/// Unit balls of revolution in dimension `dim`.
pub fn make_ball_geometry<T: Scalar>(dim: usize, epsilon: T) -> Result<GapGeometry<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    // h1 - h2 = 2(1 - sqrt(1 - s)) >= s, and the C^{1,1} norm blows up at the clamp radius
    let r = SPHERE_DOMAIN;
    let s = (1.0 - r * r).sqrt();
    let c2 = (1.0 - s) + r / s + 1.0 / (s * s * s);
    let curv_max = 1.0 / (s * s * s);
    GapGeometry::new(
        dim,
        epsilon,
        Profile::Sphere { sign: T::one() },
        Profile::Sphere { sign: -T::one() },
        T::one(),
        T::lit(c2),
    )?
    .with_kappa(T::one(), T::lit(curv_max))
}

/// Symmetric quadratic profiles h₁ = −h₂ = (κ/2)|x′|².
pub fn make_quadratic_geometry<T: Scalar>(dim: usize, epsilon: T, kappa: T) -> Result<GapGeometry<T>> {
    let m = dim.checked_sub(1).ok_or_else(|| Error::config("dimension must be at least 2"))?;
    GapGeometry::new(
        dim,
        epsilon,
        Profile::isotropic_quadratic(m, kappa),
        Profile::isotropic_quadratic(m, -kappa),
        kappa,
        lit::<T>(4.0) * kappa,
    )?
    .with_kappa(kappa, kappa)
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub hypothesis: String,
    pub point: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub radius: f64,
    pub samples: usize,
    pub c1_est: f64,
    pub c2_est: f64,
    pub kappa1_est: f64,
    pub kappa2_est: f64,
    pub violations: Vec<Violation>,
}

/// Tensor grid on [−r, r]^m restricted to the ball plus as many seeded random
/// points again.
pub(crate) fn sample_ball(m: usize, r: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let per_axis = ((samples / 2).max(2) as f64).powf(1.0 / m as f64).ceil() as usize;
    let mut pts = Vec::new();
    let mut idx = vec![0usize; m];
    'grid: loop {
        let p: Vec<f64> = idx
            .iter()
            .map(|&i| -r + 2.0 * r * i as f64 / (per_axis - 1).max(1) as f64)
            .collect();
        if p.iter().map(|c| c * c).sum::<f64>() <= r * r {
            pts.push(p);
        }
        for d in 0..m {
            idx[d] += 1;
            if idx[d] < per_axis {
                continue 'grid;
            }
            idx[d] = 0;
        }
        break;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while pts.len() < samples {
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(-r..=r)).collect();
        if p.iter().map(|c| c * c).sum::<f64>() <= r * r {
            pts.push(p);
        }
    }
    pts
}

/// A piece of the gap selected by its x′ footprint.
#[derive(Debug, Clone, PartialEq)]
pub enum Region<T: Scalar> {
    /// Ω_{x₀,r}: |x′ − x₀′| < r.
    Neck { center: Vec<T>, radius: T },
    /// Ω_r \ Ω_{r′} around x₀′.
    Annulus { center: Vec<T>, inner: T, outer: T },
    /// The whole computational domain.
    Full,
}

impl<T: Scalar> Region<T> {
    pub fn neck(center: Vec<T>, radius: T) -> Result<Self> {
        let r = Region::Neck { center, radius };
        r.validate()?;
        Ok(r)
    }

    pub fn annulus(center: Vec<T>, inner: T, outer: T) -> Result<Self> {
        let r = Region::Annulus { center, inner, outer };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Neck { center, radius } => {
                if !(*radius > T::zero()) {
                    return Err(Error::config("region radius must be positive"));
                }
                if norm_sq(center).sqrt() + *radius > T::one() {
                    return Err(Error::config("region must lie within |x'| < 1"));
                }
            }
            Region::Annulus { center, inner, outer } => {
                if !(*inner > T::zero() && inner < outer) {
                    return Err(Error::config("annulus needs 0 < inner < outer"));
                }
                if norm_sq(center).sqrt() + *outer > T::one() {
                    return Err(Error::config("region must lie within |x'| < 1"));
                }
            }
            Region::Full => {}
        }
        Ok(())
    }

    /// Membership by the x′ part of a point.
    pub fn contains_xp(&self, xp: &[T]) -> bool {
        let dist = |c: &[T]| xp.iter().zip(c).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt();
        match self {
            Region::Neck { center, radius } => dist(center) < *radius,
            Region::Annulus { center, inner, outer } => {
                let d = dist(center);
                d >= *inner && d < *outer
            }
            Region::Full => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn disk_gap_width() {
        let g = make_disk_geometry(0.01f64).unwrap();
        assert_eq!(g.gap_width(&[0.0]), 0.01);
        // high-precision value of 0.01 + 2(1 - sqrt(0.99))
        assert_relative_eq!(g.gap_width(&[0.1]), 0.020_025_125_786_760_09, max_relative = 1e-13);
        let near = make_disk_geometry(0.5f64).unwrap();
        assert!((near.h_upper.value(&[0.999_999]) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn disk_epsilon_range() {
        assert!(make_disk_geometry(0.0f64).is_err());
        assert!(make_disk_geometry(1.0f64).is_err());
        assert!(make_disk_geometry(-0.1f64).is_err());
    }

    #[test]
    fn normals() {
        let g = make_disk_geometry(0.01f64).unwrap();
        assert_eq!(g.inner_normal(Side::Upper, &[0.0]).unwrap(), vec![0.0, 1.0]);
        let nu = g.inner_normal(Side::Upper, &[0.6]).unwrap();
        assert_relative_eq!(nu[0], -0.6, epsilon = 1e-15);
        assert_relative_eq!(nu[1], 0.8, epsilon = 1e-15);
        let nl = g.inner_normal(Side::Lower, &[0.6]).unwrap();
        assert_relative_eq!(nl[0], -0.6, epsilon = 1e-15);
        assert_relative_eq!(nl[1], -0.8, epsilon = 1e-15);
        assert!(matches!(g.inner_normal(Side::Upper, &[0.9995]), Err(Error::OutsideDomain { .. })));

        let k = 1.7;
        let q = make_quadratic_geometry(3, 0.01f64, k).unwrap();
        let xp = [0.3, -0.2];
        let nu = q.inner_normal(Side::Upper, &xp).unwrap();
        let s = (1.0 + k * k * (0.09 + 0.04)).sqrt();
        for (a, b) in nu.iter().zip([-k * 0.3 / s, k * 0.2 / s, 1.0 / s]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn polynomial_derivatives() {
        let h = Profile::Polynomial(vec![0.5, 0.3, -0.1]);
        let x = [0.3, 0.4];
        let step = 1e-6;
        let g = h.gradient(&x);
        let hs = h.hessian(&x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            assert_relative_eq!(g[i], (h.value(&xp) - h.value(&xm)) / (2.0 * step), epsilon = 1e-9);
            let gp = h.gradient(&xp);
            let gm = h.gradient(&xm);
            for j in 0..2 {
                assert_relative_eq!(hs[(j, i)], (gp[j] - gm[j]) / (2.0 * step), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn sphere_hessian_matches_fd() {
        let h: Profile<f64> = Profile::Sphere { sign: 1.0 };
        let x = [0.3, 0.5];
        let step = 1e-6;
        let hs = h.hessian(&x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += step;
            xm[i] -= step;
            let gp = h.gradient(&xp);
            let gm = h.gradient(&xm);
            for j in 0..2 {
                assert_relative_eq!(hs[(j, i)], (gp[j] - gm[j]) / (2.0 * step), epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn validate_disks() {
        let g = make_disk_geometry(0.01f64).unwrap();
        let rep = g.validate_hypotheses(2000, 0.9, 0).unwrap();
        assert!(rep.c1_est >= 1.0, "c1_est = {}", rep.c1_est);
        assert!(rep.violations.is_empty(), "{:?}", rep.violations);
        assert!(rep.kappa1_est >= 1.0 && rep.kappa1_est < 1.0 + 1e-5);
    }

    #[test]
    fn validate_constant_hessian() {
        let g = GapGeometry::new(
            3,
            0.01f64,
            Profile::Polynomial(vec![1.0]),
            Profile::Polynomial(vec![-1.0]),
            1.0,
            100.0,
        )
        .unwrap();
        let rep = g.validate_hypotheses(500, 0.9, 1).unwrap();
        assert_relative_eq!(rep.kappa1_est, 2.0, epsilon = 1e-12);
        assert_relative_eq!(rep.kappa2_est, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_equal_profiles() {
        let g = GapGeometry::new(
            2,
            0.01f64,
            Profile::Polynomial(vec![1.0]),
            Profile::Polynomial(vec![1.0]),
            1.0,
            100.0,
        )
        .unwrap();
        let rep = g.validate_hypotheses(200, 0.9, 2).unwrap();
        assert!(rep.violations.iter().any(|v| v.hypothesis == "fg_1"));
        assert!(g.validate_hypotheses(50, 0.9, 2).is_err());
    }

    #[test]
    fn region_rules() {
        assert!(Region::neck(vec![0.0f64], 0.0).is_err());
        assert!(Region::annulus(vec![0.0f64], 0.3, 0.2).is_err());
        assert!(Region::neck(vec![0.8f64], 0.5).is_err());
        let a = Region::annulus(vec![0.0f64], 0.1, 0.3).unwrap();
        assert!(a.contains_xp(&[0.2]));
        assert!(!a.contains_xp(&[0.05]));
    }
}
