//! Compressed sparse column storage and the instrumented kernels built on it.
//!
//! Symmetric matrices are stored as their lower triangle only
//! ([`Symmetry::SymmetricLower`]); products expand them implicitly. The
//! `nnz` of such a matrix counts stored (lower) entries, and every cost
//! counter in the crate follows that convention.

mod kernels;
pub mod mtx;

pub use kernels::{frob_count, spmm_bdbt, spmm_btdb, spmv, two_norm_estimate};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Symmetry {
    General,
    SymmetricLower,
}

/// Compressed sparse column matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    symmetry: Symmetry,
}

impl SparseMat {
    /// Builds a matrix from raw CSC arrays, validating every storage invariant.
    pub fn new(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
        symmetry: Symmetry,
    ) -> Result<Self> {
        if col_ptr.len() != ncols + 1 {
            return Err(Error::InvalidMatrix(format!(
                "col_ptr has length {}, expected {}",
                col_ptr.len(),
                ncols + 1
            )));
        }
        if col_ptr[0] != 0 {
            return Err(Error::InvalidMatrix("col_ptr[0] must be 0".into()));
        }
        if col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidMatrix("col_ptr is not non-decreasing".into()));
        }
        let nnz = col_ptr[ncols];
        if row_idx.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidMatrix(format!(
                "col_ptr[ncols] = {nnz} but row_idx has {} and values {} entries",
                row_idx.len(),
                values.len()
            )));
        }
        if symmetry == Symmetry::SymmetricLower && nrows != ncols {
            return Err(Error::InvalidMatrix("symmetric matrix must be square".into()));
        }
        for j in 0..ncols {
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!("column {j}: row indices not strictly increasing")));
            }
            if let Some(&last) = rows.last() {
                if last >= nrows {
                    return Err(Error::InvalidMatrix(format!("column {j}: row index {last} out of range")));
                }
            }
            if symmetry == Symmetry::SymmetricLower {
                if let Some(&first) = rows.first() {
                    if first < j {
                        return Err(Error::InvalidMatrix(format!(
                            "column {j}: symmetric-lower storage holds upper entry ({first}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(Self { nrows, ncols, col_ptr, row_idx, values, symmetry })
    }

    /// Assembles from `(row, col, value)` triplets. Duplicates are summed and
    /// kept even if the sum cancels. For symmetric-lower output, upper
    /// triplets are reflected into the lower triangle.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)], symmetry: Symmetry) -> Result<Self> {
        if symmetry == Symmetry::SymmetricLower && nrows != ncols {
            return Err(Error::InvalidMatrix("symmetric matrix must be square".into()));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::InvalidMatrix(format!("triplet ({i}, {j}) outside {nrows}x{ncols}")));
            }
            let (i, j) = if symmetry == Symmetry::SymmetricLower && i < j { (j, i) } else { (i, j) };
            entries.push((j, i, v));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (j, i, v) in entries {
            if last == Some((j, i)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((j, i));
            row_idx.push(i);
            values.push(v);
            col_ptr[j + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        Self::new(nrows, ncols, col_ptr, row_idx, values, symmetry)
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
            symmetry: Symmetry::General,
        }
    }

    /// Symmetric-lower diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: diag.to_vec(),
            symmetry: Symmetry::SymmetricLower,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    /// Dense to sparse. Exact zeros are dropped; for symmetric-lower output only
    /// the lower triangle of `m` is read.
    pub fn from_dense(m: &DMatrix<f64>, symmetry: Symmetry) -> Result<Self> {
        let mut trip = Vec::new();
        for j in 0..m.ncols() {
            let start = if symmetry == Symmetry::SymmetricLower { j } else { 0 };
            for i in start..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip, symmetry)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries (lower triangle only for symmetric storage).
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry == Symmetry::SymmetricLower
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Stored entries of column `j` as `(row, value)` pairs.
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        self.row_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |j| self.col(j).map(move |(i, v)| (i, j, v)))
    }

    /// Stored value at `(i, j)`, reflecting for symmetric storage.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if self.is_symmetric() && i < j { (j, i) } else { (i, j) };
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        match self.row_idx[range.clone()].binary_search(&i) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Number of stored entries per column.
    pub fn col_counts(&self) -> Vec<usize> {
        self.col_ptr.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of stored entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.nrows];
        for &i in &self.row_idx {
            counts[i] += 1;
        }
        counts
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn abs_max(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Structural transpose. Symmetric matrices are returned unchanged.
    pub fn transpose(&self) -> SparseMat {
        if self.is_symmetric() {
            return self.clone();
        }
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                let dst = next[i];
                row_idx[dst] = j;
                values[dst] = v;
                next[i] += 1;
            }
        }
        SparseMat {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr,
            row_idx,
            values,
            symmetry: Symmetry::General,
        }
    }

    /// Full (both triangles) general storage of a symmetric-lower matrix.
    pub fn expand_symmetric(&self) -> SparseMat {
        if !self.is_symmetric() {
            return self.clone();
        }
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * self.nnz());
        for (i, j, v) in self.triplets() {
            trip.push((i, j, v));
            if i != j {
                trip.push((j, i, v));
            }
        }
        SparseMat::from_triplets(self.nrows, self.ncols, &trip, Symmetry::General)
            .expect("expansion of a valid matrix is valid")
    }

    /// Keeps the lower triangle of a square general matrix and tags it symmetric.
    /// The caller asserts the matrix is symmetric; upper entries are discarded.
    pub fn to_symmetric_lower(&self) -> Result<SparseMat> {
        if self.is_symmetric() {
            return Ok(self.clone());
        }
        if !self.is_square() {
            return Err(dim_err("to_symmetric_lower needs a square matrix"));
        }
        let trip: Vec<_> = self.triplets().filter(|&(i, j, _)| i >= j).collect();
        SparseMat::from_triplets(self.nrows, self.ncols, &trip, Symmetry::SymmetricLower)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
            if self.is_symmetric() && i != j {
                m[(j, i)] += v;
            }
        }
        m
    }

    /// `alpha * self + beta * other` on the union of both patterns. Entries that
    /// cancel stay stored, so the result pattern depends only on the inputs'
    /// patterns.
    pub fn add(&self, alpha: f64, other: &SparseMat, beta: f64) -> Result<SparseMat> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(dim_err(format!(
                "add: {}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        if self.symmetry != other.symmetry {
            return Err(Error::InvalidMatrix("add: symmetry tags differ".into()));
        }
        let mut col_ptr = Vec::with_capacity(self.ncols + 1);
        col_ptr.push(0);
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for j in 0..self.ncols {
            let mut a = self.col(j).peekable();
            let mut b = other.col(j).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ia, va)), Some((ib, vb))) if ia == ib => {
                        row_idx.push(ia);
                        values.push(alpha * va + beta * vb);
                        a.next();
                        b.next();
                    }
                    (Some((ia, va)), Some((ib, _))) if ia < ib => {
                        row_idx.push(ia);
                        values.push(alpha * va);
                        a.next();
                    }
                    (Some((ia, va)), None) => {
                        row_idx.push(ia);
                        values.push(alpha * va);
                        a.next();
                    }
                    (_, Some((ib, vb))) => {
                        row_idx.push(ib);
                        values.push(beta * vb);
                        b.next();
                    }
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMat {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
            symmetry: self.symmetry,
        })
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Same pattern with every stored value set to one.
    pub fn pattern(&self) -> SparseMat {
        let mut p = self.clone();
        p.values.iter_mut().for_each(|v| *v = 1.0);
        p
    }

    /// Uncharged product `y = op(self) x`, used by diagnostics and oracles.
    pub fn mul_vec(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let (rows_out, cols_in) = if transpose { (self.ncols, self.nrows) } else { (self.nrows, self.ncols) };
        assert_eq!(x.len(), cols_in, "mul_vec: operand length");
        let mut y = vec![0.0; rows_out];
        if self.is_symmetric() {
            for j in 0..self.ncols {
                for (i, v) in self.col(j) {
                    y[i] += v * x[j];
                    if i != j {
                        y[j] += v * x[i];
                    }
                }
            }
        } else if transpose {
            for (j, yj) in y.iter_mut().enumerate() {
                *yj = self.col(j).map(|(i, v)| v * x[i]).sum();
            }
        } else {
            for j in 0..self.ncols {
                let xj = x[j];
                for (i, v) in self.col(j) {
                    y[i] += v * xj;
                }
            }
        }
        y
    }

    /// Symmetric permutation `B = P^T A P` of a symmetric-lower matrix where
    /// `perm[k]` is the original index placed at position `k`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<SparseMat> {
        if !self.is_symmetric() || perm.len() != self.nrows {
            return Err(dim_err("permute_symmetric needs a symmetric matrix and a full permutation"));
        }
        let mut inv = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let trip: Vec<_> = self.triplets().map(|(i, j, v)| (inv[i], inv[j], v)).collect();
        SparseMat::from_triplets(self.nrows, self.ncols, &trip, Symmetry::SymmetricLower)
    }
}

/// Diagonal matrix held as its entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagMat {
    values: Vec<f64>,
}

impl DiagMat {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!("diagonal entry {pos} is not finite")));
        }
        Ok(Self { values })
    }

    pub fn identity(n: usize) -> Self {
        Self { values: vec![1.0; n] }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self { values: vec![value; n] }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inverse(&self) -> Result<DiagMat> {
        DiagMat::new(self.values.iter().map(|v| 1.0 / v).collect())
    }

    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    pub fn to_sparse(&self) -> SparseMat {
        SparseMat::from_diag(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_storage() {
        assert!(SparseMat::new(2, 2, vec![0, 1], vec![0], vec![1.0], Symmetry::General).is_err());
        assert!(SparseMat::new(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 2.0], Symmetry::General).is_err());
        assert!(SparseMat::new(2, 2, vec![0, 0, 1], vec![0], vec![1.0], Symmetry::SymmetricLower).is_err());
        assert!(SparseMat::new(2, 1, vec![0, 1], vec![2], vec![1.0], Symmetry::General).is_err());
    }

    #[test]
    fn triplets_sum_duplicates_and_reflect() {
        let a = SparseMat::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 3.0), (1, 1, 1.0)], Symmetry::SymmetricLower).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 1), 5.0);
    }

    #[test]
    fn add_keeps_cancelled_entries() {
        let a = SparseMat::from_diag(&[1.0, 2.0]);
        let c = a.add(1.0, &a, -1.0).unwrap();
        assert_eq!(c.nnz(), 2);
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resymmetrizing_is_idempotent() {
        let a = SparseMat::from_triplets(3, 3, &[(0, 0, 4.0), (2, 0, 1.0), (2, 1, -2.0), (1, 1, 3.0)], Symmetry::SymmetricLower)
            .unwrap();
        let full = a.expand_symmetric();
        assert_eq!(full.nnz(), 6);
        let back = full.to_symmetric_lower().unwrap();
        assert_eq!(back, a);
        assert_eq!(back.expand_symmetric().to_symmetric_lower().unwrap(), back);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = SparseMat::from_triplets(2, 3, &[(0, 0, 1.0), (1, 2, 2.0), (0, 1, 3.0)], Symmetry::General).unwrap();
        let t = a.transpose();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.get(2, 1), 2.0);
        assert_eq!(t.transpose(), a);
    }

    #[test]
    fn diag_rejects_non_finite() {
        assert!(DiagMat::new(vec![1.0, f64::NAN]).is_err());
        assert!(DiagMat::new(vec![1.0, 2.0]).unwrap().is_positive());
    }
}
