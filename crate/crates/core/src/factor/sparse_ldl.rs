//! Pivot-free up-looking sparse `LDL^T`.
//!
//! Safe for quasi-definite matrices in any ordering, and for the saddle-point
//! matrices of this crate in natural ordering (negative definite leading
//! block followed by a zero block), where every pivot is the diagonal of a
//! definite Schur complement.

use super::symbolic::{symbolic_cholesky, upper_csc};
use crate::error::{Error, Result};
use crate::sparse::{SparseMat, Symmetry};

pub(crate) enum PivotRule {
    /// Any pivot with `|d| >= tol` is accepted.
    Nonzero,
    /// Pivots must exceed `tol` times the column's own diagonal entry
    /// (Cholesky). The test is scale-invariant per column.
    Positive,
}

pub(crate) struct NumericLdl {
    pub l: SparseMat,
    pub d: Vec<f64>,
}

/// Factors `A + diag(shift)` where `shift[k]` is added to the `k`-th diagonal
/// entry. `tol` is the absolute pivot threshold.
pub(crate) fn factor(a: &SparseMat, shift: &[f64], tol: f64, rule: PivotRule) -> Result<NumericLdl> {
    let n = a.ncols();
    let sym = symbolic_cholesky(a)?;
    let (aptr, aidx, aval) = upper_csc(a);

    let mut lp = vec![0usize; n + 1];
    for k in 0..n {
        lp[k + 1] = lp[k] + sym.col_counts_l[k] - 1;
    }
    let total = lp[n];
    let mut li = vec![0usize; total];
    let mut lx = vec![0.0; total];
    let mut lnz = vec![0usize; n];
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut flag = vec![usize::MAX; n];
    let mut pattern = vec![0usize; n];

    for k in 0..n {
        let mut top = n;
        flag[k] = k;
        y[k] = shift[k];
        for p in aptr[k]..aptr[k + 1] {
            let mut i = aidx[p];
            y[i] += aval[p];
            let mut len = 0;
            while flag[i] != k {
                pattern[len] = i;
                len += 1;
                flag[i] = k;
                i = sym.etree[i].expect("row subtree stays below k");
            }
            while len > 0 {
                top -= 1;
                len -= 1;
                pattern[top] = pattern[len];
            }
        }
        let akk = y[k];
        d[k] = y[k];
        y[k] = 0.0;
        for &i in &pattern[top..n] {
            let yi = y[i];
            y[i] = 0.0;
            let start = lp[i];
            for p in start..start + lnz[i] {
                y[li[p]] -= lx[p] * yi;
            }
            let lki = yi / d[i];
            d[k] -= lki * yi;
            let pos = start + lnz[i];
            li[pos] = k;
            lx[pos] = lki;
            lnz[i] += 1;
        }
        let bad = match rule {
            PivotRule::Nonzero => !(d[k].abs() >= tol),
            PivotRule::Positive => !(d[k] > tol * akk.abs()),
        };
        if bad {
            return Err(match rule {
                PivotRule::Nonzero => Error::Factorization { pivot: k },
                PivotRule::Positive => Error::NotPositiveDefinite { pivot: k },
            });
        }
    }
    let l = SparseMat::new(n, n, lp, li, lx, Symmetry::General).expect("factor pattern follows symbolic analysis");
    Ok(NumericLdl { l, d })
}
