use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::sparse::SparseMat;

/// Elimination tree and column counts of the Cholesky factor of a pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicInfo {
    /// Entries per column of `L`, diagonal included.
    pub col_counts_l: Vec<usize>,
    pub nnz_l: usize,
    /// `etree[j]` is the parent of column `j`, `None` at a root.
    pub etree: Vec<Option<usize>>,
}

impl SymbolicInfo {
    /// `sum_j nz(L[:,j])^2`.
    pub fn fact_cost(&self) -> u64 {
        self.col_counts_l.iter().map(|&c| (c * c) as u64).sum()
    }

    /// `2 nz(L)` for one triangular sweep.
    pub fn trsv_cost(&self) -> u64 {
        2 * self.nnz_l as u64
    }
}

/// Upper-triangle columns of a symmetric-lower matrix: column `k` lists the
/// rows `i <= k` with a stored `(k, i)` entry, in increasing order.
pub(crate) fn upper_csc(a: &SparseMat) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let n = a.ncols();
    let mut counts = vec![0usize; n + 1];
    for &i in a.row_idx() {
        counts[i + 1] += 1;
    }
    for k in 0..n {
        counts[k + 1] += counts[k];
    }
    let ptr = counts.clone();
    let mut next = counts;
    let mut idx = vec![0; a.nnz()];
    let mut val = vec![0.0; a.nnz()];
    for j in 0..n {
        for (i, v) in a.col(j) {
            let dst = next[i];
            idx[dst] = j;
            val[dst] = v;
            next[i] += 1;
        }
    }
    (ptr, idx, val)
}

/// Column counts of the Cholesky factor of a symmetric pattern (values are
/// ignored), via the elimination tree and row subtrees.
pub fn symbolic_cholesky(pattern: &SparseMat) -> Result<SymbolicInfo> {
    if !pattern.is_symmetric() {
        return Err(dim_err("symbolic_cholesky expects symmetric-lower storage"));
    }
    let n = pattern.ncols();
    let (ptr, idx, _) = upper_csc(pattern);
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut flag = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    for k in 0..n {
        flag[k] = k;
        for &row in &idx[ptr[k]..ptr[k + 1]] {
            let mut i = row;
            if i >= k {
                continue;
            }
            while flag[i] != k {
                if parent[i].is_none() {
                    parent[i] = Some(k);
                }
                lnz[i] += 1;
                flag[i] = k;
                i = parent[i].expect("set above");
            }
        }
    }
    let col_counts_l: Vec<usize> = lnz.iter().map(|c| c + 1).collect();
    let nnz_l = col_counts_l.iter().sum();
    Ok(SymbolicInfo { col_counts_l, nnz_l, etree: parent })
}
