use crate::error::{Error, Result};
use crate::geometry::GapGeometry;
use crate::linalg::Mat;
use crate::scalar::{lit, norm_sq, Scalar};

/// Chart 𝒵 = Λ̃(x) centered at x₀′: shifts x′ and rescales the transverse
/// coordinate so the gap over every x′ maps onto a slab of the width at x₀′.
#[derive(Debug, Clone)]
pub struct NeckChart<T: Scalar> {
    pub geom: GapGeometry<T>,
    pub base_xp: Vec<T>,
    pub outer_radius: T,
}

impl<T: Scalar> NeckChart<T> {
    pub fn new(geom: GapGeometry<T>, base_xp: Vec<T>, outer_radius: T) -> Result<Self> {
        if base_xp.len() != geom.tangential_dim() {
            return Err(Error::config("chart center has the wrong number of components"));
        }
        if !(outer_radius > T::zero() && outer_radius <= lit(0.5)) {
            return Err(Error::config(format!("outer radius must lie in (0, 1/2], got {outer_radius}")));
        }
        geom.check_domain(&base_xp)?;
        Ok(NeckChart { geom, base_xp, outer_radius })
    }

    /// Chart at the origin, the configuration the solver uses.
    pub fn centered(geom: GapGeometry<T>, outer_radius: T) -> Result<Self> {
        let m = geom.tangential_dim();
        Self::new(geom, vec![T::zero(); m], outer_radius)
    }

    /// Full slab thickness h₁(x₀′) − h₂(x₀′) + ε.
    pub fn slab_width(&self) -> T {
        self.geom.gap_width(&self.base_xp)
    }

    fn split<'a>(&self, x: &'a [T]) -> Result<(&'a [T], T)> {
        if x.len() != self.geom.dim {
            return Err(Error::invariant(format!("point has {} components, expected {}", x.len(), self.geom.dim)));
        }
        let (xp, xn) = x.split_at(self.geom.dim - 1);
        Ok((xp, xn[0]))
    }

    pub fn neck_forward(&self, x: &[T]) -> Result<Vec<T>> {
        let (xp, xn) = self.split(x)?;
        self.geom.check_domain(xp)?;
        let lo = self.geom.lower_surface(xp);
        let hi = self.geom.upper_surface(xp);
        let slack = T::epsilon() * lit::<T>(16.0) * (T::one() + xn.abs());
        if xn < lo - slack || xn > hi + slack {
            return Err(Error::NotInDomain(format!("x_n = {xn} outside [{lo}, {hi}]")));
        }
        let width = self.geom.gap_width(xp);
        let mut z: Vec<T> = xp.iter().zip(&self.base_xp).map(|(&a, &b)| a - b).collect();
        z.push(self.slab_width() * ((xn - lo) / width - lit(0.5)));
        Ok(z)
    }

    pub fn neck_inverse(&self, z: &[T]) -> Result<Vec<T>> {
        let (zp, zn) = self.split(z)?;
        let xp: Vec<T> = zp.iter().zip(&self.base_xp).map(|(&a, &b)| a + b).collect();
        self.geom.check_domain(&xp)?;
        let t = zn / self.slab_width() + lit(0.5);
        let xn = self.geom.lower_surface(&xp) + t * self.geom.gap_width(&xp);
        let mut x = xp;
        x.push(xn);
        Ok(x)
    }

    /// B = DΛ̃ at Λ̃⁻¹(𝒵) and det B = b_nn.
    pub fn neck_jacobian(&self, z: &[T]) -> Result<(Mat<T>, T)> {
        let x = self.neck_inverse(z)?;
        let n = self.geom.dim;
        let (xp, xn) = x.split_at(n - 1);
        let xn = xn[0];
        let half_eps = self.geom.epsilon * lit(0.5);
        let h1 = self.geom.h_upper.value(xp);
        let h2 = self.geom.h_lower.value(xp);
        let d1 = self.geom.h_upper.gradient(xp);
        let d2 = self.geom.h_lower.gradient(xp);
        let width = self.geom.gap_width(xp);
        let w0 = self.slab_width();
        let mut b = Mat::identity(n);
        for j in 0..n - 1 {
            b[(n - 1, j)] = w0 / (width * width) * (d2[j] * (xn - h1 - half_eps) - d1[j] * (xn - h2 + half_eps));
        }
        let bnn = w0 / width;
        b[(n - 1, n - 1)] = bnn;
        Ok((b, bnn))
    }

    /// Slab point from tangential offset and transverse fraction t ∈ [0, 1].
    pub fn slab_point(&self, zp: &[T], t: T) -> Vec<T> {
        let mut z = zp.to_vec();
        z.push(self.slab_width() * (t - lit(0.5)));
        z
    }

    pub fn contains_slab(&self, z: &[T]) -> bool {
        let (zp, zn) = z.split_at(z.len() - 1);
        norm_sq(zp).sqrt() < self.outer_radius && zn[0].abs() <= self.slab_width() * lit(0.5)
    }
}
