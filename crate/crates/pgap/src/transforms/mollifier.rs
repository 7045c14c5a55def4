use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 1 / ∫_{B₁} (1 − |z|²)⁴ dz in ℝ^m, i.e. Γ(5 + m/2) / (π^{m/2} Γ(5)).
pub fn bump_normalization(m: usize) -> f64 {
    // Gamma at integers and half-integers via the recurrence
    let mut x = 5.0 + m as f64 / 2.0;
    let mut g = 1.0;
    while x > 1.0 {
        x -= 1.0;
        g *= x;
    }
    if (x - 0.5).abs() < 1e-12 {
        g *= std::f64::consts::PI.sqrt();
    }
    g / (std::f64::consts::PI.powf(m as f64 / 2.0) * 24.0)
}

/// Quadrature for ∫ f(z) φ(z) dz over the unit ball of ℝ^m with
/// φ = c (1 − |z|²)⁴₊. Weights already include φ.
#[derive(Debug, Clone)]
pub struct MollifierRule<T> {
    pub dim: usize,
    pub order: usize,
    pub nodes: Vec<Vec<T>>,
    pub weights: Vec<T>,
}

impl<T: Scalar> MollifierRule<T> {
    /// Gauss–Legendre in 1D; Gauss–Legendre radius times a uniform angle rule in 2D.
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        let order_nz = NonZeroUsize::new(order).ok_or_else(|| Error::config("quadrature order must be positive"))?;
        let c = bump_normalization(dim);
        let bump = |r2: f64| c * (1.0 - r2).max(0.0).powi(4);
        let gl = GaussLegendre::new(order_nz);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        match dim {
            1 => {
                for &(z, w) in gl.iter() {
                    nodes.push(vec![T::lit(z)]);
                    weights.push(T::lit(w * bump(z * z)));
                }
            }
            2 => {
                let n_theta = 2 * order;
                let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
                for &(s, w) in gl.iter() {
                    let rho = 0.5 * (s + 1.0);
                    let wr = 0.5 * w * rho * bump(rho * rho) * dtheta;
                    for k in 0..n_theta {
                        let th = (k as f64 + 0.5) * dtheta;
                        nodes.push(vec![T::lit(rho * th.cos()), T::lit(rho * th.sin())]);
                        weights.push(T::lit(wr));
                    }
                }
            }
            _ => {
                return Err(Error::config(format!(
                    "mollifier quadrature supports 1 or 2 tangential dimensions, got {dim}"
                )))
            }
        }
        Ok(MollifierRule { dim, order, nodes, weights })
    }

    /// ∫ f(z) φ(z) dz.
    pub fn integrate<F: FnMut(&[T]) -> T>(&self, mut f: F) -> T {
        self.nodes.iter().zip(&self.weights).map(|(z, &w)| w * f(z)).sum()
    }
}
