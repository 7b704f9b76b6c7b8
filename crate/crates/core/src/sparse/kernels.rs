use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DiagMat, SparseMat, Symmetry};
use crate::costmodel::{CostLedger, Kernel};
use crate::error::{dim_err, Result};

const NORM_SEED: u64 = 0x5eed_2a0f;

/// `B v` (or `B^T v`), charging `2 nnz(B)` to the spmv counter.
pub fn spmv(b: &SparseMat, v: &[f64], transpose: bool, ledger: &mut CostLedger) -> Result<Vec<f64>> {
    let expected = if transpose { b.nrows() } else { b.ncols() };
    if v.len() != expected {
        return Err(dim_err(format!(
            "spmv: {}x{} matrix{} applied to vector of length {}",
            b.nrows(),
            b.ncols(),
            if transpose { " (transposed)" } else { "" },
            v.len()
        )));
    }
    ledger.charge(Kernel::Spmv, 2 * b.nnz() as u64);
    Ok(b.mul_vec(v, transpose))
}

/// `B^T D1 B` in symmetric-lower storage, charging `sum_i nz(B[i,:])^2`.
pub fn spmm_btdb(b: &SparseMat, d1: &DiagMat, ledger: &mut CostLedger) -> Result<SparseMat> {
    if b.is_symmetric() {
        return Err(dim_err("spmm_btdb expects general storage"));
    }
    if d1.dim() != b.nrows() {
        return Err(dim_err(format!("spmm_btdb: D1 has dim {}, B has {} rows", d1.dim(), b.nrows())));
    }
    let cost: u64 = b.row_counts().iter().map(|&c| (c * c) as u64).sum();
    ledger.charge(Kernel::Spmm, cost);
    Ok(gram_lower(b, d1.values()))
}

/// `B D2 B^T` in symmetric-lower storage, charging `sum_j nz(B[:,j])^2`.
pub fn spmm_bdbt(b: &SparseMat, d2: &DiagMat, ledger: &mut CostLedger) -> Result<SparseMat> {
    if b.is_symmetric() {
        return Err(dim_err("spmm_bdbt expects general storage"));
    }
    if d2.dim() != b.ncols() {
        return Err(dim_err(format!("spmm_bdbt: D2 has dim {}, B has {} columns", d2.dim(), b.ncols())));
    }
    let cost: u64 = b.col_counts().iter().map(|&c| (c * c) as u64).sum();
    ledger.charge(Kernel::Spmm, cost);
    Ok(gram_lower(&b.transpose(), d2.values()))
}

/// Lower triangle of `B^T diag(d) B` on the structural product pattern.
fn gram_lower(b: &SparseMat, d: &[f64]) -> SparseMat {
    let n = b.ncols();
    let rows = b.transpose();
    let mut acc = vec![0.0; n];
    let mut mark = vec![usize::MAX; n];
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    let mut row_idx = Vec::new();
    let mut values = Vec::new();
    let mut touched = Vec::new();
    for k in 0..n {
        touched.clear();
        for (i, bik) in b.col(k) {
            let w = d[i] * bik;
            for (j, bij) in rows.col(i) {
                if j < k {
                    continue;
                }
                if mark[j] != k {
                    mark[j] = k;
                    acc[j] = 0.0;
                    touched.push(j);
                }
                acc[j] += w * bij;
            }
        }
        touched.sort_unstable();
        for &j in &touched {
            row_idx.push(j);
            values.push(acc[j]);
        }
        col_ptr.push(row_idx.len());
    }
    SparseMat::new(n, n, col_ptr, row_idx, values, Symmetry::SymmetricLower).expect("gram product pattern is valid")
}

/// Charges `nnz(A)` to the norm counter and returns it. The norm value itself
/// comes from [`two_norm_estimate`].
pub fn frob_count(a: &SparseMat, ledger: &mut CostLedger) -> usize {
    ledger.charge(Kernel::Norm, a.nnz() as u64);
    a.nnz()
}

/// Power-iteration estimate of the largest singular value.
///
/// The start vector is drawn from a fixed seed so repeated calls agree
/// bitwise. Symmetric matrices iterate on `A` directly, general ones on
/// `A^T A`. Not charged to any ledger.
pub fn two_norm_estimate(a: &SparseMat, iters: usize) -> f64 {
    let iters = iters.max(1);
    if a.nnz() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v: Vec<f64> = (0..a.ncols()).map(|_| 0.5 + rng.random::<f64>()).collect();
    normalize(&mut v);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let av = a.mul_vec(&v, false);
        estimate = norm2(&av);
        if estimate == 0.0 {
            return 0.0;
        }
        v = if a.is_symmetric() { av } else { a.mul_vec(&av, true) };
        if normalize(&mut v) == 0.0 {
            break;
        }
    }
    estimate
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}
