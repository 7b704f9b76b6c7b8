//! Symmetric factorizations and triangular solves.
//!
//! Two backends produce the same [`FactorHandle`]:
//!
//! * [`Backend::SparseRegularized`]: pivot-free sparse `LDL^T` with an optional
//!   static quasi-definite shift. This is the path the solver runs on. Its
//!   flop charges come from the realized factor pattern.
//! * [`Backend::DenseBk`]: dense Bunch-Kaufman with 1x1/2x2 pivots, used as a
//!   correctness oracle. Its charges come from the symbolic Cholesky pattern
//!   of the input so that both backends report against one convention.
//!
//! Every numeric factorization bumps the ledger's event counter for the
//! supplied label; that is how the single-factorization property is checked.

mod dense_bk;
mod ordering;
mod sparse_ldl;
mod symbolic;

pub use ordering::reverse_cuthill_mckee;
pub use symbolic::{symbolic_cholesky, SymbolicInfo};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::costmodel::{CostLedger, Kernel};
use crate::error::{dim_err, Error, Result};
use crate::sparse::{SparseMat, Symmetry};

/// Relative pivot tolerance against `max|A|`.
pub const PIVOT_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    DenseBk,
    SparseRegularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ordering {
    Natural,
    ReverseCuthillMckee,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Ldlt,
    Cholesky,
}

/// Options for [`ldlt_factor`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdltOptions {
    pub backend: Backend,
    /// Static regularization for the sparse backend: `-reg` on positions
    /// `< split`, `+reg` on positions `>= split`.
    pub reg: f64,
    pub split: usize,
    pub ordering: Ordering,
}

impl Default for LdltOptions {
    fn default() -> Self {
        Self { backend: Backend::SparseRegularized, reg: 0.0, split: 0, ordering: Ordering::Natural }
    }
}

impl LdltOptions {
    pub fn dense() -> Self {
        Self { backend: Backend::DenseBk, ..Self::default() }
    }

    /// Sparse backend with a quasi-definite shift around a saddle-point split.
    pub fn regularized(reg: f64, split: usize) -> Self {
        Self { reg, split, ..Self::default() }
    }
}

/// A 1x1 pivot or a symmetric 2x2 pivot `[[a, b], [b, c]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PivotBlock {
    One(f64),
    Two { a: f64, b: f64, c: f64 },
}

impl PivotBlock {
    pub fn size(&self) -> usize {
        match self {
            PivotBlock::One(_) => 1,
            PivotBlock::Two { .. } => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

/// Reusable factorization `P^T A P = L D L^T`.
#[derive(Clone, Debug)]
pub struct FactorHandle {
    /// `perm[k]` is the original index at pivot position `k`.
    perm: Vec<usize>,
    /// Strictly lower part of the unit lower factor.
    l: SparseMat,
    blocks: Vec<PivotBlock>,
    kind: FactorKind,
    backend: Backend,
    source_dim: usize,
    /// `nz(L)` (diagonal included) charged per triangular sweep.
    charged_nnz_l: usize,
    inertia: Inertia,
}

impl FactorHandle {
    pub fn dim(&self) -> usize {
        self.source_dim
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn l(&self) -> &SparseMat {
        &self.l
    }

    pub fn pivots(&self) -> &[PivotBlock] {
        &self.blocks
    }

    pub fn inertia(&self) -> Inertia {
        self.inertia
    }

    /// `nz(L)` including the unit diagonal, as used by the trsv cost.
    pub fn nnz_l(&self) -> usize {
        self.charged_nnz_l
    }

    /// Diagonal of the `L L^T` Cholesky factor (`sqrt` of the pivots).
    pub fn cholesky_diagonal(&self) -> Option<Vec<f64>> {
        if self.kind != FactorKind::Cholesky {
            return None;
        }
        Some(
            self.blocks
                .iter()
                .map(|b| match b {
                    PivotBlock::One(d) => d.sqrt(),
                    PivotBlock::Two { .. } => unreachable!("cholesky handles hold 1x1 pivots"),
                })
                .collect(),
        )
    }

    /// Dense `P L D L^T P^T`, for reconstruction checks.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.source_dim;
        let mut l = self.l.to_dense();
        for i in 0..n {
            l[(i, i)] = 1.0;
        }
        let mut d = DMatrix::zeros(n, n);
        let mut pos = 0;
        for blk in &self.blocks {
            match *blk {
                PivotBlock::One(v) => d[(pos, pos)] = v,
                PivotBlock::Two { a, b, c } => {
                    d[(pos, pos)] = a;
                    d[(pos + 1, pos)] = b;
                    d[(pos, pos + 1)] = b;
                    d[(pos + 1, pos + 1)] = c;
                }
            }
            pos += blk.size();
        }
        let inner = &l * d * l.transpose();
        let mut out = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(self.perm[r], self.perm[c])] = inner[(r, c)];
            }
        }
        out
    }
}

fn inertia_of(blocks: &[PivotBlock]) -> Inertia {
    let mut out = Inertia::default();
    for blk in blocks {
        match *blk {
            PivotBlock::One(d) if d > 0.0 => out.positive += 1,
            PivotBlock::One(d) if d < 0.0 => out.negative += 1,
            PivotBlock::One(_) => out.zero += 1,
            PivotBlock::Two { a, b, c } => {
                let det = a * c - b * b;
                if det < 0.0 {
                    out.positive += 1;
                    out.negative += 1;
                } else if a + c > 0.0 {
                    out.positive += 2;
                } else {
                    out.negative += 2;
                }
            }
        }
    }
    out
}

fn check_symmetric(a: &SparseMat) -> Result<()> {
    if !a.is_symmetric() {
        return Err(dim_err("factorization expects symmetric-lower storage"));
    }
    Ok(())
}

/// Symmetric indefinite `LDL^T`.
pub fn ldlt_factor(a: &SparseMat, opts: &LdltOptions, label: &str, ledger: &mut CostLedger) -> Result<FactorHandle> {
    check_symmetric(a)?;
    let n = a.ncols();
    let tol = PIVOT_TOL * a.abs_max();
    let handle = match opts.backend {
        Backend::SparseRegularized => {
            let perm: Vec<usize> = match opts.ordering {
                Ordering::Natural => (0..n).collect(),
                Ordering::ReverseCuthillMckee => reverse_cuthill_mckee(a),
            };
            let permuted;
            let work = if opts.ordering == Ordering::Natural {
                a
            } else {
                permuted = a.permute_symmetric(&perm)?;
                &permuted
            };
            let shift: Vec<f64> =
                perm.iter().map(|&orig| if orig < opts.split { -opts.reg } else { opts.reg }).collect();
            let num = sparse_ldl::factor(work, &shift, tol, sparse_ldl::PivotRule::Nonzero)?;
            let blocks: Vec<PivotBlock> = num.d.iter().map(|&d| PivotBlock::One(d)).collect();
            let charged_nnz_l = num.l.nnz() + n;
            let fact_cost: u64 = num.l.col_counts().iter().map(|&c| ((c + 1) * (c + 1)) as u64).sum();
            ledger.charge(Kernel::Fact, fact_cost);
            FactorHandle {
                perm,
                inertia: inertia_of(&blocks),
                l: num.l,
                blocks,
                kind: FactorKind::Ldlt,
                backend: Backend::SparseRegularized,
                source_dim: n,
                charged_nnz_l,
            }
        }
        Backend::DenseBk => {
            let sym = symbolic_cholesky(a)?;
            let bk = dense_bk::factor(&a.to_dense(), tol)?;
            ledger.charge(Kernel::Fact, sym.fact_cost());
            let mut lower = bk.l;
            for i in 0..n {
                lower[(i, i)] = 0.0;
            }
            let l = SparseMat::from_dense(&lower, Symmetry::General)?;
            FactorHandle {
                perm: bk.perm,
                inertia: inertia_of(&bk.blocks),
                l,
                blocks: bk.blocks,
                kind: FactorKind::Ldlt,
                backend: Backend::DenseBk,
                source_dim: n,
                charged_nnz_l: sym.nnz_l,
            }
        }
    };
    ledger.record_factorization(label);
    Ok(handle)
}

/// Sparse Cholesky, stored as unit `L` with positive 1x1 pivots.
pub fn cholesky_factor(a: &SparseMat, label: &str, ledger: &mut CostLedger) -> Result<FactorHandle> {
    check_symmetric(a)?;
    let n = a.ncols();
    let num = sparse_ldl::factor(a, &vec![0.0; n], PIVOT_TOL, sparse_ldl::PivotRule::Positive)?;
    let blocks: Vec<PivotBlock> = num.d.iter().map(|&d| PivotBlock::One(d)).collect();
    let fact_cost: u64 = num.l.col_counts().iter().map(|&c| ((c + 1) * (c + 1)) as u64).sum();
    ledger.charge(Kernel::Fact, fact_cost);
    ledger.record_factorization(label);
    Ok(FactorHandle {
        perm: (0..n).collect(),
        inertia: Inertia { positive: n, negative: 0, zero: 0 },
        charged_nnz_l: num.l.nnz() + n,
        l: num.l,
        blocks,
        kind: FactorKind::Cholesky,
        backend: Backend::SparseRegularized,
        source_dim: n,
    })
}

/// Solves `A x = b` with a forward and a backward sweep, charging
/// `2 nz(L)` per sweep.
pub fn solve(f: &FactorHandle, b: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
    if b.len() != f.source_dim {
        return Err(dim_err(format!("solve: rhs has length {}, factor has dim {}", b.len(), f.source_dim)));
    }
    let n = f.source_dim;
    let mut y: Vec<f64> = f.perm.iter().map(|&p| b[p]).collect();
    for j in 0..n {
        let yj = y[j];
        if yj != 0.0 {
            for (i, lij) in f.l.col(j) {
                y[i] -= lij * yj;
            }
        }
    }
    let mut pos = 0;
    for blk in &f.blocks {
        match *blk {
            PivotBlock::One(d) => y[pos] /= d,
            PivotBlock::Two { a, b, c } => {
                let det = a * c - b * b;
                let (y1, y2) = (y[pos], y[pos + 1]);
                y[pos] = (c * y1 - b * y2) / det;
                y[pos + 1] = (a * y2 - b * y1) / det;
            }
        }
        pos += blk.size();
    }
    for j in (0..n).rev() {
        let s: f64 = f.l.col(j).map(|(i, lij)| lij * y[i]).sum();
        y[j] -= s;
    }
    let mut x = vec![0.0; n];
    for (k, &p) in f.perm.iter().enumerate() {
        x[p] = y[k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite value in triangular solve".into()));
    }
    ledger.charge(Kernel::Trsv, 2 * 2 * f.charged_nnz_l as u64);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_residual(a: &SparseMat, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x, false);
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        r / b.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SparseMat {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let a = b.transpose() * &b + DMatrix::identity(n, n);
        SparseMat::from_dense(&a, Symmetry::SymmetricLower).unwrap()
    }

    fn saddle(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SparseMat {
        let h = random_spd(rng, n).to_dense();
        let a = DMatrix::from_fn(m, n, |_, _| rng.random::<f64>());
        let mut f = DMatrix::zeros(n + m, n + m);
        f.view_mut((0, 0), (n, n)).copy_from(&(-h));
        f.view_mut((n, 0), (m, n)).copy_from(&a);
        f.view_mut((0, n), (n, m)).copy_from(&a.transpose());
        SparseMat::from_dense(&f, Symmetry::SymmetricLower).unwrap()
    }

    #[test]
    fn diag_indefinite_inertia() {
        let mut l = CostLedger::new();
        let a = SparseMat::from_diag(&[-2.0, 3.0]);
        for opts in [LdltOptions::default(), LdltOptions::dense()] {
            let f = ldlt_factor(&a, &opts, "A", &mut l).unwrap();
            assert_eq!(f.inertia(), Inertia { positive: 1, negative: 1, zero: 0 });
        }
        assert_eq!(l.factorizations("A"), 2);
    }

    #[test]
    fn two_by_two_saddle() {
        let f = SparseMat::from_triplets(2, 2, &[(0, 0, -1.0), (1, 0, 1.0)], Symmetry::SymmetricLower).unwrap();
        let mut l = CostLedger::new();
        for opts in [LdltOptions::default(), LdltOptions::dense()] {
            let h = ldlt_factor(&f, &opts, "F", &mut l).unwrap();
            assert_eq!(h.inertia(), Inertia { positive: 1, negative: 1, zero: 0 });
            let x = solve(&h, &[1.0, 0.0], &mut l).unwrap();
            // [-1 1; 1 0] x = [1; 0]  =>  x = (0, 1)
            assert!((x[0] - 0.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn cholesky_small() {
        let mut l = CostLedger::new();
        let f = cholesky_factor(&SparseMat::identity(5), "I", &mut l).unwrap();
        assert_eq!(l.fact_flops, 5);
        assert_eq!(f.l().nnz(), 0);
        let f = cholesky_factor(&SparseMat::from_diag(&[4.0, 9.0]), "D", &mut l).unwrap();
        assert_eq!(f.cholesky_diagonal().unwrap(), vec![2.0, 3.0]);
        assert_eq!(solve(&f, &[4.0, 9.0], &mut l).unwrap(), vec![1.0, 1.0]);
        let bad = SparseMat::from_diag(&[1.0, -1.0]);
        assert!(matches!(cholesky_factor(&bad, "X", &mut l), Err(Error::NotPositiveDefinite { pivot: 1 })));
    }

    #[test]
    fn solve_charges_two_sweeps() {
        let mut l = CostLedger::new();
        let f = ldlt_factor(&SparseMat::identity(3), &LdltOptions::default(), "I", &mut l).unwrap();
        let x = solve(&f, &[1.0, 2.0, 3.0], &mut l).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
        assert_eq!(l.trsv_flops, 12);
        let f = ldlt_factor(&SparseMat::from_diag(&[2.0, 4.0]), &LdltOptions::default(), "D", &mut l).unwrap();
        assert_eq!(solve(&f, &[2.0, 4.0], &mut l).unwrap(), vec![1.0, 1.0]);
        assert!(solve(&f, &[1.0], &mut l).is_err());
    }

    #[test]
    fn random_spd_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut l = CostLedger::new();
        let a = random_spd(&mut rng, 8);
        let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        for f in [
            cholesky_factor(&a, "A", &mut l).unwrap(),
            ldlt_factor(&a, &LdltOptions::default(), "A", &mut l).unwrap(),
            ldlt_factor(&a, &LdltOptions::dense(), "A", &mut l).unwrap(),
        ] {
            let x = solve(&f, &b, &mut l).unwrap();
            assert!(rel_residual(&a, &x, &b) <= 1e-12);
        }
    }

    #[test]
    fn singular_pivot_reported() {
        let a = SparseMat::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0)], Symmetry::SymmetricLower).unwrap();
        let mut l = CostLedger::new();
        assert!(matches!(
            ldlt_factor(&a, &LdltOptions::default(), "S", &mut l),
            Err(Error::Factorization { pivot: 1 })
        ));
        assert!(ldlt_factor(&a, &LdltOptions::dense(), "S", &mut l).is_err());
        assert_eq!(l.factorizations("S"), 0);
    }

    #[test]
    fn saddle_inertia_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, m) in [(8, 4), (6, 6), (12, 1), (20, 9)] {
            let f = saddle(&mut rng, n, m);
            let norm = f.to_dense().abs().max();
            let mut l = CostLedger::new();
            for opts in [LdltOptions::default(), LdltOptions::dense()] {
                let h = ldlt_factor(&f, &opts, "F", &mut l).unwrap();
                assert_eq!(h.inertia(), Inertia { positive: m, negative: n, zero: 0 });
                let err = (h.reconstruct() - f.to_dense()).abs().max();
                assert!(err <= 1e-10 * norm, "reconstruction error {err}");
            }
        }
    }

    #[test]
    fn dense_bk_needs_two_by_two_pivots() {
        // zero diagonal forces 2x2 pivoting
        let a = SparseMat::from_triplets(
            4,
            4,
            &[(1, 0, 1.0), (2, 1, 2.0), (3, 2, 1.5), (3, 0, 0.5)],
            Symmetry::SymmetricLower,
        )
        .unwrap();
        let mut l = CostLedger::new();
        let h = ldlt_factor(&a, &LdltOptions::dense(), "Z", &mut l).unwrap();
        assert!(h.pivots().iter().any(|b| b.size() == 2));
        let err = (h.reconstruct() - a.to_dense()).abs().max();
        assert!(err <= 1e-12);
        let b = vec![1.0, -1.0, 2.0, 0.5];
        let x = solve(&h, &b, &mut l).unwrap();
        assert!(rel_residual(&a, &x, &b) <= 1e-12);
    }

    #[test]
    fn backends_agree_on_regularized_saddle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = saddle(&mut rng, 10, 4);
        let b: Vec<f64> = (0..14).map(|_| rng.random::<f64>()).collect();
        let mut l = CostLedger::new();
        let reg = 1e-10 * f.abs_max();
        let dense = solve(&ldlt_factor(&f, &LdltOptions::dense(), "F", &mut l).unwrap(), &b, &mut l).unwrap();
        for ordering in [Ordering::Natural, Ordering::ReverseCuthillMckee] {
            let opts = LdltOptions { ordering, ..LdltOptions::regularized(reg, 10) };
            let sparse = solve(&ldlt_factor(&f, &opts, "F", &mut l).unwrap(), &b, &mut l).unwrap();
            let num: f64 = dense.iter().zip(&sparse).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let den: f64 = dense.iter().map(|p| p * p).sum::<f64>().sqrt();
            assert!(num / den <= 1e-6, "relative disagreement {}", num / den);
        }
    }

    #[test]
    fn sparse_charges_match_symbolic() {
        let mut t = Vec::new();
        for i in 0..5 {
            t.push((i, i, 4.0));
            if i + 1 < 5 {
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMat::from_triplets(5, 5, &t, Symmetry::SymmetricLower).unwrap();
        let mut l = CostLedger::new();
        let f = ldlt_factor(&a, &LdltOptions::default(), "T", &mut l).unwrap();
        assert_eq!(l.fact_flops, 17);
        assert_eq!(f.nnz_l(), 9);
        solve(&f, &[1.0; 5], &mut l).unwrap();
        assert_eq!(l.trsv_flops, 36);
    }

    #[test]
    fn rebuild_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let a = random_spd(&mut rng, 7);
        let mut l = CostLedger::new();
        let f1 = cholesky_factor(&a, "A", &mut l).unwrap();
        let f2 = cholesky_factor(&a, "A", &mut l).unwrap();
        assert_eq!(f1.l(), f2.l());
        assert_eq!(f1.pivots(), f2.pivots());
    }
}
