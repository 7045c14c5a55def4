use sprs::{CsMat, FillInReduction, SymmetryCheck};
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse LDLᵀ factorization that keeps its symbolic analysis across
/// refactorizations of matrices with the same pattern.
pub struct SparseLdl<T: Scalar> {
    num: Option<LdlNumeric<T, usize>>,
    nnz: usize,
}

impl<T: Scalar> Default for SparseLdl<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> SparseLdl<T> {
    pub fn new() -> Self {
        SparseLdl { num: None, nnz: 0 }
    }

    pub fn factor(&mut self, mat: &CsMat<T>) -> Result<()> {
        let fail = |e: sprs::errors::LinalgError| Error::Factorization(e.to_string());
        match &mut self.num {
            Some(num) if self.nnz == mat.nnz() && num.problem_size() == mat.rows() => {
                num.update(mat.view()).map_err(fail)?;
            }
            _ => {
                let num = Ldl::new()
                    .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
                    .check_symmetry(SymmetryCheck::DontCheckSymmetry)
                    .numeric(mat.view())
                    .map_err(fail)?;
                self.num = Some(num);
                self.nnz = mat.nnz();
            }
        }
        Ok(())
    }

    /// True when every pivot of the last factorization is positive.
    pub fn positive_definite(&self) -> bool {
        self.num.as_ref().is_some_and(|n| n.d().iter().all(|&d| d > T::zero() && d.is_finite()))
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        let num = self.num.as_ref().ok_or_else(|| Error::invariant("solve called before factor"))?;
        let x: Vec<T> = num.solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization("non-finite solution".into()));
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprs::TriMat;

    #[test]
    fn tridiagonal_system() {
        let n = 50;
        let mut t = TriMat::new((n, n));
        for i in 0..n {
            t.add_triplet(i, i, 2.0f64);
            if i + 1 < n {
                t.add_triplet(i, i + 1, -1.0);
                t.add_triplet(i + 1, i, -1.0);
            }
        }
        let a: CsMat<f64> = t.to_csr();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| a.outer_view(i).unwrap().iter().map(|(j, &v)| v * x[j]).sum()).collect();
        let mut ldl = SparseLdl::new();
        ldl.factor(&a).unwrap();
        assert!(ldl.positive_definite());
        let y = ldl.solve(&b).unwrap();
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-10);
        }
        // refactor with the same pattern
        let a2 = a.map(|v| 2.0 * v);
        ldl.factor(&a2).unwrap();
        let y2 = ldl.solve(&b).unwrap();
        assert!((y2[7] - 0.5 * x[7]).abs() < 1e-10);
    }

    #[test]
    fn single_precision() {
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 0, 2.0f32);
        t.add_triplet(1, 1, 4.0);
        t.add_triplet(0, 1, 1.0);
        t.add_triplet(1, 0, 1.0);
        let mut ldl = SparseLdl::new();
        ldl.factor(&t.to_csr()).unwrap();
        let y = ldl.solve(&[3.0f32, 5.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-6 && (y[1] - 1.0).abs() < 1e-6);
    }
}
