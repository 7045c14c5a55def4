use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::mollifier::MollifierRule;
use crate::error::{Error, Result};
use crate::geometry::{GapGeometry, Profile};
use crate::linalg::Mat;
use crate::scalar::{lit, norm, norm_sq, Scalar};

/// The annular flattening map x = Φ(y) at scale r.
///
/// Profiles are cut off to zero beyond |x′| = 2r₀ and mollified at the
/// y_n-dependent scale μ = (r⁴ − y_n²)/r, which vanishes on y_n = ±r².
#[derive(Debug, Clone)]
pub struct PhiChart<T: Scalar> {
    pub geom: GapGeometry<T>,
    pub scale_r: T,
    pub r0: T,
    pub rule: MollifierRule<T>,
}

/// Φ(y) together with its intermediates.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiPoint<T> {
    pub x: Vec<T>,
    pub g: Vec<T>,
    pub theta: Vec<T>,
    pub xi: Vec<T>,
    pub mu: T,
    /// h̃₁^μ(y′), h̃₂^μ(y′).
    pub h_mu: [T; 2],
}

struct Mollified<T: Scalar> {
    value: T,
    grad: Vec<T>,
    hess: Mat<T>,
    /// ∂/∂μ of the mollified gradient.
    dgrad_dmu: Vec<T>,
}

/// Data of Φ at one point needed for the first derivatives.
struct Pieces<T: Scalar> {
    gap: T,
    dgap: Vec<T>,
    dh_sum: Vec<T>,
    s: Vec<T>,
    d: Vec<T>,
    hs: Mat<T>,
    hd: Mat<T>,
    s_mu: Vec<T>,
    d_mu: Vec<T>,
    mu: T,
    h_mu: [T; 2],
    h_sum: T,
}

impl<T: Scalar> PhiChart<T> {
    /// Chart at scale r with cutoff radius r₀ and the given quadrature order.
    pub fn new(geom: GapGeometry<T>, scale_r: T, r0: T, quad_order: usize) -> Result<Self> {
        let m = geom.tangential_dim();
        if !(scale_r > geom.epsilon.sqrt() && scale_r <= r0) {
            return Err(Error::config(format!(
                "scale r = {scale_r} must lie in (sqrt(eps), r0] = ({}, {r0}]",
                geom.epsilon.sqrt()
            )));
        }
        if !(lit::<T>(2.0) * r0 < geom.domain_radius()) {
            return Err(Error::config("2 r0 must stay inside the profile domain"));
        }
        let rule = MollifierRule::new(m, quad_order)?;
        Ok(PhiChart { geom, scale_r, r0, rule })
    }

    fn cutoff(&self, xp: &[T]) -> bool {
        norm_sq(xp).sqrt() > lit::<T>(2.0) * self.r0
    }

    fn tilde_value(&self, h: &Profile<T>, xp: &[T]) -> T {
        if self.cutoff(xp) {
            T::zero()
        } else {
            h.value(xp)
        }
    }

    fn tilde_gradient(&self, h: &Profile<T>, xp: &[T]) -> Vec<T> {
        if self.cutoff(xp) {
            vec![T::zero(); xp.len()]
        } else {
            h.gradient(xp)
        }
    }

    fn tilde_hessian(&self, h: &Profile<T>, xp: &[T]) -> Mat<T> {
        if self.cutoff(xp) {
            Mat::zeros(xp.len(), xp.len())
        } else {
            h.hessian(xp)
        }
    }

    fn mollify(&self, h: &Profile<T>, yp: &[T], mu: T) -> Mollified<T> {
        let m = yp.len();
        if mu == T::zero() {
            return Mollified {
                value: self.tilde_value(h, yp),
                grad: self.tilde_gradient(h, yp),
                hess: self.tilde_hessian(h, yp),
                dgrad_dmu: vec![T::zero(); m],
            };
        }
        let mut value = T::zero();
        let mut grad = vec![T::zero(); m];
        let mut hess = Mat::zeros(m, m);
        let mut dgrad = vec![T::zero(); m];
        let mut pt = vec![T::zero(); m];
        for (z, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            for k in 0..m {
                pt[k] = yp[k] - mu * z[k];
            }
            value += w * self.tilde_value(h, &pt);
            let g = self.tilde_gradient(h, &pt);
            let hh = self.tilde_hessian(h, &pt);
            for i in 0..m {
                grad[i] += w * g[i];
                for j in 0..m {
                    hess[(i, j)] += w * hh[(i, j)];
                    dgrad[i] -= w * hh[(i, j)] * z[j];
                }
            }
        }
        Mollified { value, grad, hess, dgrad_dmu: dgrad }
    }

    fn check_point(&self, y: &[T]) -> Result<()> {
        let n = self.geom.dim;
        if y.len() != n {
            return Err(Error::invariant(format!("point has {} components, expected {n}", y.len())));
        }
        let r = self.scale_r;
        let (yp, yn) = y.split_at(n - 1);
        let rho = norm_sq(yp).sqrt();
        // a little slack so finite differences can straddle the edges
        let slack = lit::<T>(1e-3);
        let r2 = r * r;
        let inside = yn[0].abs() <= r2 * (T::one() + slack)
            && rho <= lit::<T>(2.0) * r * (T::one() + slack)
            && rho >= r * lit(0.25) * (T::one() - slack);
        if inside {
            Ok(())
        } else {
            Err(Error::NotInDomain(format!("y = {y:?} outside the annular cylinder at r = {r}")))
        }
    }

    fn pieces(&self, y: &[T]) -> Pieces<T> {
        let n = self.geom.dim;
        let (yp, yn) = y.split_at(n - 1);
        let yn = yn[0];
        let r = self.scale_r;
        let r2 = r * r;
        let mu = -(yn - r2) * (yn + r2) / r;
        let g = &self.geom;
        let h1 = self.tilde_value(&g.h_upper, yp);
        let h2 = self.tilde_value(&g.h_lower, yp);
        let d1 = self.tilde_gradient(&g.h_upper, yp);
        let d2 = self.tilde_gradient(&g.h_lower, yp);
        let m1 = self.mollify(&g.h_upper, yp, mu);
        let m2 = self.mollify(&g.h_lower, yp, mu);
        let zip = |a: &[T], b: &[T], s: T| a.iter().zip(b).map(|(&u, &v)| u + s * v).collect::<Vec<T>>();
        Pieces {
            gap: g.epsilon + h1 - h2,
            dgap: zip(&d1, &d2, -T::one()),
            dh_sum: zip(&d1, &d2, T::one()),
            s: zip(&m1.grad, &m2.grad, T::one()),
            d: zip(&m1.grad, &m2.grad, -T::one()),
            hs: m1.hess.add(&m2.hess),
            hd: m1.hess.add(&m2.hess.scale(-T::one())),
            s_mu: zip(&m1.dgrad_dmu, &m2.dgrad_dmu, T::one()),
            d_mu: zip(&m1.dgrad_dmu, &m2.dgrad_dmu, -T::one()),
            mu,
            h_mu: [m1.value, m2.value],
            h_sum: h1 + h2,
        }
    }

    fn forward_unchecked(&self, y: &[T]) -> PhiPoint<T> {
        let n = self.geom.dim;
        let (yp, yn) = y.split_at(n - 1);
        let yn = yn[0];
        let r = self.scale_r;
        let r2 = r * r;
        let pc = self.pieces(y);
        let c6 = pc.gap / (lit::<T>(8.0) * r2 * r2 * r2);
        let c4 = pc.gap / (lit::<T>(8.0) * r2 * r2);
        let theta: Vec<T> = pc.s.iter().map(|&s| c6 * s).collect();
        let xi: Vec<T> = pc.d.iter().map(|&d| c4 * d).collect();
        let q = (yn - r2) * (yn + r2);
        let gvec: Vec<T> = theta.iter().zip(&xi).map(|(&t, &x)| q * (t * yn + x)).collect();
        let mut x: Vec<T> = yp.iter().zip(&gvec).map(|(&a, &b)| a - b).collect();
        x.push(lit::<T>(0.5) * (yn / r2 * pc.gap + pc.h_sum));
        PhiPoint { x, g: gvec, theta, xi, mu: pc.mu, h_mu: pc.h_mu }
    }

    pub fn phi_forward(&self, y: &[T]) -> Result<PhiPoint<T>> {
        self.check_point(y)?;
        let p = self.forward_unchecked(y);
        if p.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: 0, what: "phi_forward produced a non-finite value".into() });
        }
        Ok(p)
    }

    fn jacobian_unchecked(&self, y: &[T]) -> Mat<T> {
        let n = self.geom.dim;
        let m = n - 1;
        let yn = y[m];
        let r = self.scale_r;
        let r2 = r * r;
        let pc = self.pieces(y);
        let k6 = lit::<T>(8.0) * r2 * r2 * r2;
        let k4 = lit::<T>(8.0) * r2 * r2;
        let q = (yn - r2) * (yn + r2);
        let mu_yn = lit::<T>(-2.0) * yn / r;
        let mut a = Mat::zeros(n, n);
        for i in 0..m {
            let theta = pc.gap * pc.s[i] / k6;
            let xi = pc.gap * pc.d[i] / k4;
            for j in 0..m {
                let dtheta = (pc.dgap[j] * pc.s[i] + pc.gap * pc.hs[(i, j)]) / k6;
                let dxi = (pc.dgap[j] * pc.d[i] + pc.gap * pc.hd[(i, j)]) / k4;
                let dg = q * (dtheta * yn + dxi);
                a[(i, j)] = if i == j { T::one() } else { T::zero() } - dg;
            }
            let theta_n = pc.gap * pc.s_mu[i] * mu_yn / k6;
            let xi_n = pc.gap * pc.d_mu[i] * mu_yn / k4;
            let dgn = lit::<T>(2.0) * yn * (theta * yn + xi) + q * (theta_n * yn + theta + xi_n);
            a[(i, m)] = -dgn;
        }
        for j in 0..m {
            a[(m, j)] = lit::<T>(0.5) * (yn / r2 * pc.dgap[j] + pc.dh_sum[j]);
        }
        a[(m, m)] = pc.gap / (lit::<T>(2.0) * r2);
        a
    }

    /// DΦ(y).
    pub fn phi_jacobian(&self, y: &[T]) -> Result<Mat<T>> {
        self.check_point(y)?;
        Ok(self.jacobian_unchecked(y))
    }

    /// D²Φ by central differences of DΦ; entry `a` is the Hessian of x_a.
    pub fn phi_second_derivatives(&self, y: &[T]) -> Result<Vec<Mat<T>>> {
        self.check_point(y)?;
        let n = self.geom.dim;
        let r = self.scale_r;
        let mut out = vec![Mat::zeros(n, n); n];
        for k in 0..n {
            let step = if k + 1 == n { r * r * lit(1e-4) } else { r * lit(1e-4) };
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[k] += step;
            ym[k] -= step;
            let ap = self.jacobian_unchecked(&yp);
            let am = self.jacobian_unchecked(&ym);
            for a in 0..n {
                for j in 0..n {
                    out[a][(j, k)] = (ap[(a, j)] - am[(a, j)]) / (lit::<T>(2.0) * step);
                }
            }
        }
        Ok(out.into_iter().map(|h| h.symmetric_part()).collect())
    }

    /// y = Φ⁻¹(x) by damped Newton with the forward Jacobian.
    pub fn phi_inverse(&self, x: &[T]) -> Result<Vec<T>> {
        let n = self.geom.dim;
        let m = n - 1;
        let r2 = self.scale_r * self.scale_r;
        let xp = &x[..m];
        let gap = self.geom.epsilon + self.tilde_value(&self.geom.h_upper, xp) - self.tilde_value(&self.geom.h_lower, xp);
        let hs = self.tilde_value(&self.geom.h_upper, xp) + self.tilde_value(&self.geom.h_lower, xp);
        let mut y = xp.to_vec();
        y.push((r2 * (lit::<T>(2.0) * x[m] - hs) / gap).max(-r2).min(r2));
        let scale = T::one() + norm(x);
        let tol = lit::<T>(1e-12);
        let resid = |y: &[T]| -> Vec<T> {
            let f = self.forward_unchecked(y);
            f.x.iter().zip(x).map(|(&a, &b)| a - b).collect()
        };
        let mut res = resid(&y);
        for _ in 0..50 {
            let rn = norm(&res);
            if rn <= tol * scale {
                self.check_point(&y)?;
                return Ok(y);
            }
            let jac = self.jacobian_unchecked(&y);
            let inv = jac
                .inverse()
                .ok_or_else(|| Error::invariant("singular Jacobian during inversion"))?;
            let step = inv.mul_vec(&res);
            let mut t = T::one();
            loop {
                let trial: Vec<T> = y.iter().zip(&step).map(|(&a, &b)| a - t * b).collect();
                let tr = resid(&trial);
                if norm(&tr) < rn || t < lit(1e-6) {
                    y = trial;
                    res = tr;
                    break;
                }
                t *= lit(0.5);
            }
        }
        if norm(&res) <= lit::<T>(1e3) * tol * scale {
            self.check_point(&y)?;
            return Ok(y);
        }
        Err(Error::invariant("phi inversion did not converge in 50 iterations"))
    }

    /// Sine of the angle between DΦ·e_n and (−∇h̃, 1) on y_n = ±r².
    pub fn parallelism_residual(&self, yp: &[T], upper: bool) -> Result<T> {
        let n = self.geom.dim;
        let r2 = self.scale_r * self.scale_r;
        let mut y = yp.to_vec();
        y.push(if upper { r2 } else { -r2 });
        let a = self.phi_jacobian(&y)?;
        let w: Vec<T> = (0..n).map(|i| a[(i, n - 1)]).collect();
        let h = if upper { &self.geom.h_upper } else { &self.geom.h_lower };
        let mut v: Vec<T> = self.tilde_gradient(h, yp).into_iter().map(|c| -c).collect();
        v.push(T::one());
        let wn = norm(&w);
        let vn = norm(&v);
        let cos: T = w.iter().zip(&v).map(|(&a, &b)| a * b).sum::<T>() / (wn * vn);
        let perp: Vec<T> = w.iter().zip(&v).map(|(&a, &b)| a / wn - cos * b / vn).collect();
        Ok(norm(&perp))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiViolation {
    pub y: Vec<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiBoundsReport {
    pub r: f64,
    pub epsilon: f64,
    pub p: f64,
    pub samples: usize,
    pub boundary_samples: usize,
    /// Smallest C with I/C ≤ sym(DΦ) ≤ C·I over the samples.
    #[serde(rename = "C_jacobian")]
    pub c_jacobian: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// max |b̃| over the samples.
    #[serde(rename = "C_btilde")]
    pub c_btilde: f64,
    /// r · max |b̃|.
    #[serde(rename = "C_btilde_r")]
    pub c_btilde_r: f64,
    /// max |b̃_i| per component; the last entry is the transverse one.
    pub c_btilde_components: Vec<f64>,
    pub parallelism_residual_max: f64,
    pub violations: Vec<PhiViolation>,
}

impl PhiChart<f64> {
    /// D²_x y_i for each component i, from D²_y x through
    /// D²_x y_i = −Σ_a (D_x y)_{ia} (D_x y)ᵀ D²_y x_a (D_x y).
    /// `None` when DΦ is singular.
    pub fn inverse_hessians(&self, y: &[f64]) -> Result<Option<Vec<Mat<f64>>>> {
        let n = self.geom.dim;
        let a = self.phi_jacobian(y)?;
        let Some(ainv) = a.inverse() else {
            return Ok(None);
        };
        let hess = self.phi_second_derivatives(y)?;
        let sandwiched: Vec<Mat<f64>> = hess.iter().map(|h| ainv.transpose().mul(h).mul(&ainv)).collect();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut t = Mat::zeros(n, n);
            for (ai, s) in sandwiched.iter().enumerate() {
                t = t.add(&s.scale(-ainv[(i, ai)]));
            }
            out.push(t);
        }
        Ok(Some(out))
    }

    /// Per-component worst case of |b̃_i| over a = I + c(p−2)ξξᵀ, |ξ| = 1, c ∈ [0, 1).
    pub fn btilde_worst(&self, y: &[f64], p: f64) -> Result<Option<Vec<f64>>> {
        let n = self.geom.dim;
        let Some(ts) = self.inverse_hessians(y)? else {
            return Ok(None);
        };
        Ok(Some(
            ts.iter()
                .map(|t| {
                    let tr = t.trace();
                    let ev = t.sym_eigenvalues();
                    let lo = tr + (p - 2.0) * ev[0];
                    let hi = tr + (p - 2.0) * ev[n - 1];
                    tr.abs().max(lo.abs()).max(hi.abs())
                })
                .collect(),
        ))
    }

    /// Measures the Jacobian bounds, the first-order coefficient b̃ of the
    /// transformed equation and the boundary parallelism residual.
    ///
    /// b̃_i = a^{kl} ∂²y_i/∂x_k∂x_l is maximized over coefficient matrices
    /// a = I + c(p−2)ξξᵀ with |ξ| = 1 and c ∈ [0, 1).
    pub fn verify_phi_bounds(&self, samples: usize, p: f64, seed: u64) -> Result<PhiBoundsReport> {
        if samples < 1000 {
            return Err(Error::config(format!("verify_phi_bounds needs at least 1000 samples, got {samples}")));
        }
        let n = self.geom.dim;
        let m = n - 1;
        let r = self.scale_r;
        let r2 = r * r;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw_yp = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let rho = rng.random_range(0.25 * r..=2.0 * r);
            match m {
                1 => vec![if rng.random_bool(0.5) { rho } else { -rho }],
                _ => {
                    let th = rng.random_range(0.0..std::f64::consts::TAU);
                    vec![rho * th.cos(), rho * th.sin()]
                }
            }
        };
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(samples);
        // structured part: radial lines through the annulus
        let per = 16usize;
        for i in 0..per {
            for j in 0..per {
                let rho = 0.25 * r + (2.0 * r - 0.25 * r) * i as f64 / (per - 1) as f64;
                let yn = -r2 + 2.0 * r2 * j as f64 / (per - 1) as f64;
                let mut y = vec![0.0; m];
                y[0] = rho;
                y.push(yn);
                pts.push(y);
            }
        }
        while pts.len() < samples {
            let mut y = draw_yp(&mut rng);
            y.push(rng.random_range(-r2..=r2));
            pts.push(y);
        }
        let mut rep = PhiBoundsReport {
            r,
            epsilon: self.geom.epsilon,
            p,
            samples: pts.len(),
            boundary_samples: 0,
            c_jacobian: 0.0,
            lambda_min: f64::INFINITY,
            lambda_max: f64::NEG_INFINITY,
            c_btilde: 0.0,
            c_btilde_r: 0.0,
            c_btilde_components: vec![0.0; n],
            parallelism_residual_max: 0.0,
            violations: Vec::new(),
        };
        for y in &pts {
            let a = self.phi_jacobian(y)?;
            let ev = a.symmetric_part().sym_eigenvalues();
            let (lo, hi) = (ev[0], ev[n - 1]);
            rep.lambda_min = rep.lambda_min.min(lo);
            rep.lambda_max = rep.lambda_max.max(hi);
            if !(lo > 0.0) || !hi.is_finite() {
                rep.violations.push(PhiViolation {
                    y: y.clone(),
                    detail: format!("symmetric part of the Jacobian not positive: eigenvalues [{lo:e}, {hi:e}]"),
                });
                continue;
            }
            let Some(b) = self.btilde_worst(y, p)? else {
                rep.violations.push(PhiViolation { y: y.clone(), detail: "singular Jacobian".into() });
                continue;
            };
            for (c, v) in rep.c_btilde_components.iter_mut().zip(&b) {
                *c = c.max(*v);
            }
            let b2: f64 = b.iter().map(|v| v * v).sum();
            rep.c_btilde = rep.c_btilde.max(b2.sqrt());
        }
        if rep.lambda_min > 0.0 {
            rep.c_jacobian = rep.lambda_max.max(1.0 / rep.lambda_min);
        } else {
            rep.c_jacobian = f64::INFINITY;
        }
        rep.c_btilde_r = r * rep.c_btilde;
        let nb = (samples / 10).max(100);
        for k in 0..nb {
            let yp = draw_yp(&mut rng);
            let upper = k % 2 == 0;
            let res = self.parallelism_residual(&yp, upper)?;
            rep.parallelism_residual_max = rep.parallelism_residual_max.max(res);
        }
        rep.boundary_samples = nb;
        Ok(rep)
    }
}
