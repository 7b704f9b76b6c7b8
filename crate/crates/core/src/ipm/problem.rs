use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMat;

/// `min 1/2 x^T H x + c^T x  s.t.  A x = b,  C x >= d`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub name: String,
    /// Symmetric-lower `n x n`.
    pub h: SparseMat,
    pub c: Vec<f64>,
    /// `m1 x n`.
    pub a: SparseMat,
    pub b: Vec<f64>,
    /// `m2 x n`.
    pub cmat: SparseMat,
    pub d: Vec<f64>,
    /// Constant term of the objective. Not part of [`QpProblem::objective`].
    pub obj_const: f64,
}

/// Sizes and nonzero counts of a problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub name: String,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub nnz_h: usize,
    pub nnz_a: usize,
    pub nnz_c: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidProblem(msg.into())
}

impl QpProblem {
    pub fn new(
        name: impl Into<String>,
        h: SparseMat,
        c: Vec<f64>,
        a: SparseMat,
        b: Vec<f64>,
        cmat: SparseMat,
        d: Vec<f64>,
    ) -> Result<Self> {
        let p = Self { name: name.into(), h, c, a, b, cmat, d, obj_const: 0.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    pub fn m1(&self) -> usize {
        self.a.nrows()
    }

    pub fn m2(&self) -> usize {
        self.cmat.nrows()
    }

    /// Shape checks plus the scope rules: at least one equality and one
    /// inequality row.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if !self.h.is_symmetric() {
            return Err(invalid("H must use symmetric-lower storage"));
        }
        if self.a.is_symmetric() || self.cmat.is_symmetric() {
            return Err(invalid("A and C must use general storage"));
        }
        if self.c.len() != n || self.a.ncols() != n || self.cmat.ncols() != n {
            return Err(invalid(format!("inconsistent column dimension (n = {n})")));
        }
        if self.b.len() != self.m1() || self.d.len() != self.m2() {
            return Err(invalid("right-hand side lengths do not match A and C"));
        }
        if self.m1() == 0 {
            return Err(invalid("problems without equality constraints (m1 = 0) are not supported"));
        }
        if self.m2() == 0 {
            return Err(invalid("problems without inequality constraints (m2 = 0) are not supported"));
        }
        if self.m1() > n {
            return Err(invalid(format!("m1 = {} exceeds n = {n}", self.m1())));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.c) || !finite(&self.b) || !finite(&self.d) {
            return Err(invalid("non-finite data vector"));
        }
        Ok(())
    }

    /// Dense rank test of `A`; meant for desk-scale problems.
    pub fn check_full_row_rank(&self) -> Result<()> {
        let r = row_rank(&self.a);
        if r < self.m1() {
            return Err(invalid(format!("A has rank {r} < m1 = {}", self.m1())));
        }
        Ok(())
    }

    /// `1/2 x^T H x + c^T x`, uncharged.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let hx = self.h.mul_vec(x, false);
        let quad: f64 = x.iter().zip(&hx).map(|(a, b)| a * b).sum();
        let lin: f64 = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        0.5 * quad + lin
    }

    pub fn manifest(&self) -> ProblemManifest {
        ProblemManifest {
            name: self.name.clone(),
            n: self.n(),
            m1: self.m1(),
            m2: self.m2(),
            nnz_h: self.h.nnz(),
            nnz_a: self.a.nnz(),
            nnz_c: self.cmat.nnz(),
        }
    }
}

/// Numerical rank of a sparse matrix via a dense SVD.
pub fn row_rank(a: &SparseMat) -> usize {
    dense_rank(&a.to_dense())
}

fn dense_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = smax * (m.nrows().max(m.ncols()) as f64) * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    fn row(v: &[f64]) -> SparseMat {
        let t: Vec<_> = v.iter().enumerate().map(|(j, &x)| (0, j, x)).collect();
        SparseMat::from_triplets(1, v.len(), &t, Symmetry::General).unwrap()
    }

    #[test]
    fn scope_rules() {
        let h = SparseMat::identity(2);
        let c2 = SparseMat::identity(2).expand_symmetric();
        let ok = QpProblem::new("ok", h.clone(), vec![0.0; 2], row(&[1.0, 1.0]), vec![1.0], c2.clone(), vec![0.0; 2]);
        assert!(ok.is_ok());
        let no_eq = QpProblem::new("x", h.clone(), vec![0.0; 2], SparseMat::zeros(0, 2), vec![], c2.clone(), vec![0.0; 2]);
        assert!(matches!(no_eq, Err(Error::InvalidProblem(_))));
        let no_ineq = QpProblem::new("x", h.clone(), vec![0.0; 2], row(&[1.0, 1.0]), vec![1.0], SparseMat::zeros(0, 2), vec![]);
        assert!(matches!(no_ineq, Err(Error::InvalidProblem(_))));
        let bad = QpProblem::new("x", h, vec![0.0; 3], row(&[1.0, 1.0]), vec![1.0], c2, vec![0.0; 2]);
        assert!(bad.is_err());
    }

    #[test]
    fn objective_and_rank() {
        let h = SparseMat::from_diag(&[2.0, 4.0]);
        let c2 = SparseMat::identity(2).expand_symmetric();
        let p = QpProblem::new("p", h, vec![1.0, -1.0], row(&[1.0, 1.0]), vec![1.0], c2, vec![0.0; 2]).unwrap();
        assert_eq!(p.objective(&[1.0, 1.0]), 0.5 * 6.0);
        assert!(p.check_full_row_rank().is_ok());
        let zero = QpProblem { a: row(&[0.0, 0.0]), ..p };
        assert!(zero.check_full_row_rank().is_err());
        assert_eq!(zero.manifest().nnz_a, 2);
    }
}
