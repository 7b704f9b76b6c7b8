//! Flop-cost model of the IPM strategies.
//!
//! Kernel costs follow fixed conventions, shared with the instrumented
//! kernels:
//!
//! | kernel | cost |
//! |---|---|
//! | `c_fact(M)` | `sum_j nz(L[:,j])^2`, diagonal included, from the symbolic factor |
//! | `c_trsv(L)` | `2 nz(L)`, one triangular sweep |
//! | `c_spmv(B)` | `2 nz(B)` (stored entries) |
//! | `c_spmm(B^T, D B)` | `sum_i nz(B[i,:])^2` |
//! | `c_spmm(B, D B^T)` | `sum_j nz(B[:,j])^2` |
//! | `c_norm(B)` | `nz(B)` |
//!
//! A solve with a factorization is two sweeps, `2 c_trsv`. Every strategy
//! also pays `c_rhs = c_spmv(H) + 2 c_spmv(A) + 2 c_spmv(C)` per IPM iteration
//! for the residuals.

mod ledger;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use ledger::{CostLedger, Kernel};

use crate::error::{dim_err, Result};
use crate::factor::{symbolic_cholesky, Backend, Ordering, reverse_cuthill_mckee};
use crate::ipm::{build_f, build_g, kc_from_g, regularize_hessian, IpmConfig, QpProblem, Variant};
use crate::precond::{pcp_pattern, prg_matrix, PhFamily, PhMode};
use crate::sparse::{DiagMat, SparseMat};

/// `c_fact` of a symmetric pattern.
pub fn c_fact(pattern: &SparseMat) -> Result<u64> {
    Ok(symbolic_cholesky(pattern)?.fact_cost())
}

/// `c_trsv` of the factor of a symmetric pattern.
pub fn c_trsv(pattern: &SparseMat) -> Result<u64> {
    Ok(symbolic_cholesky(pattern)?.trsv_cost())
}

pub fn c_spmv(b: &SparseMat) -> u64 {
    2 * b.nnz() as u64
}

/// Cost of `B^T D B`.
pub fn c_spmm_btdb(b: &SparseMat) -> u64 {
    b.row_counts().iter().map(|&c| (c * c) as u64).sum()
}

/// Cost of `B D B^T`.
pub fn c_spmm_bdbt(b: &SparseMat) -> u64 {
    b.col_counts().iter().map(|&c| (c * c) as u64).sum()
}

pub fn c_norm(b: &SparseMat) -> u64 {
    b.nnz() as u64
}

/// `c_fact` and `c_trsv` of one factorized matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorCost {
    pub fact: u64,
    pub trsv: u64,
}

impl FactorCost {
    pub fn of(pattern: &SparseMat) -> Result<Self> {
        let s = symbolic_cholesky(pattern)?;
        Ok(Self { fact: s.fact_cost(), trsv: s.trsv_cost() })
    }

    fn of_ordered(pattern: &SparseMat, ordering: Ordering) -> Result<Self> {
        match ordering {
            Ordering::Natural => Self::of(pattern),
            Ordering::ReverseCuthillMckee => Self::of(&pattern.permute_symmetric(&reverse_cuthill_mckee(pattern))?),
        }
    }
}

/// Kernel costs of every matrix touched by some strategy on one problem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelCosts {
    pub spmv_h: u64,
    pub spmv_a: u64,
    pub spmv_c: u64,
    pub spmv_kc: u64,
    /// `C^T D^{-1} C`, formed for `G`.
    pub spmm_ctdc: u64,
    /// `A^T W^{-1} A` of the augmented Lagrangian preconditioner.
    pub spmm_atwa: u64,
    /// `C diag(H)^{-1} C^T`, formed once for `P_H` (zero in exact-h mode).
    pub spmm_cdct: u64,
    pub norm_g: u64,
    pub f: FactorCost,
    pub kc: FactorCost,
    pub pcp: FactorCost,
    pub prg: FactorCost,
    pub ph: FactorCost,
}

impl KernelCosts {
    /// Costs from the structural patterns of `p`. Values never enter: every
    /// matrix is assembled with a unit scaling `D` purely for its pattern.
    pub fn from_problem(p: &QpProblem, ordering: Ordering, ph_mode: PhMode) -> Result<Self> {
        let mut scratch = CostLedger::new();
        let unit = DiagMat::identity(p.m2());
        let g = build_g(p, &unit, &mut scratch)?;
        let kc = kc_from_g(p, &g)?;
        let f = build_f(p)?;
        let prg = prg_matrix(&g, &p.a, 1.0, &mut scratch)?;
        let ph = if p.h.diagonal().iter().all(|&v| v > 0.0) || ph_mode == PhMode::ExactH {
            PhFamily::new(&p.cmat, &p.h, ph_mode, &mut scratch).and_then(|fam| fam.pattern()).ok()
        } else {
            None
        };
        Ok(Self {
            spmv_h: c_spmv(&p.h),
            spmv_a: c_spmv(&p.a),
            spmv_c: c_spmv(&p.cmat),
            spmv_kc: c_spmv(&kc),
            spmm_ctdc: c_spmm_btdb(&p.cmat),
            spmm_atwa: c_spmm_btdb(&p.a),
            spmm_cdct: if ph_mode == PhMode::DiagH { c_spmm_bdbt(&p.cmat) } else { 0 },
            norm_g: c_norm(&g),
            f: FactorCost::of_ordered(&f, ordering)?,
            kc: FactorCost::of_ordered(&kc, ordering)?,
            pcp: FactorCost::of_ordered(&pcp_pattern(p.n(), &p.a)?, ordering)?,
            prg: FactorCost::of(&prg)?,
            ph: match ph {
                Some(pat) => FactorCost::of(&pat)?,
                None => FactorCost::default(),
            },
        })
    }

    /// Costs for the problem `solve_qp` actually works on, after the Hessian
    /// shift it applies when `H` is not positive definite.
    pub fn for_config(p: &QpProblem, cfg: &IpmConfig) -> Result<Self> {
        match regularize_hessian(&p.h, cfg.regularization_rho_scale)? {
            Some((h, _)) => Self::from_problem(&QpProblem { h, ..p.clone() }, cfg.ordering, cfg.ph_mode),
            None => Self::from_problem(p, cfg.ordering, cfg.ph_mode),
        }
    }

    /// Residual evaluation per IPM iteration.
    pub fn c_rhs(&self) -> u64 {
        self.spmv_h + 2 * self.spmv_a + 2 * self.spmv_c
    }
}

/// Predicted flops of one run, split by kernel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostPrediction {
    pub variant: Variant,
    pub fact: u64,
    pub trsv: u64,
    pub spmv: u64,
    pub spmm: u64,
    pub norm: u64,
    pub total: u64,
}

impl CostPrediction {
    pub fn get(&self, kernel: Kernel) -> u64 {
        match kernel {
            Kernel::Fact => self.fact,
            Kernel::Trsv => self.trsv,
            Kernel::Spmv => self.spmv,
            Kernel::Spmm => self.spmm,
            Kernel::Norm => self.norm,
        }
    }
}

/// Evaluates the cost formula of `variant` for `n_i` IPM iterations with
/// `n_kr[k]` Krylov iterations in iteration `k`. `n_kr` must be empty for
/// the direct strategy and have `n_i` entries otherwise.
pub fn predict_variant(variant: Variant, kc: &KernelCosts, n_i: usize, n_kr: &[usize]) -> Result<CostPrediction> {
    if variant.is_iterative() && n_kr.len() != n_i {
        return Err(dim_err(format!("{variant}: {} Krylov counts for {n_i} IPM iterations", n_kr.len())));
    }
    if !variant.is_iterative() && !n_kr.is_empty() {
        return Err(dim_err("the direct strategy has no Krylov counts"));
    }
    let n = n_i as u64;
    let s: u64 = n_kr.iter().map(|&k| k as u64).sum();
    let (mut fact, mut trsv, mut spmv, mut spmm, mut norm) = (0, 0, n * kc.c_rhs(), 0, 0);
    match variant {
        Variant::DKc => {
            fact += n * kc.kc.fact;
            trsv += n * 2 * kc.kc.trsv;
            spmv += n * 2 * kc.spmv_c;
            spmm += n * kc.spmm_ctdc;
        }
        Variant::UKc | Variant::CpKc | Variant::RgKc => {
            spmv += 2 * s * kc.spmv_kc + n * 2 * kc.spmv_c;
            spmm += n * kc.spmm_ctdc;
            let pre = match variant {
                Variant::CpKc => Some(kc.pcp),
                Variant::RgKc => Some(kc.prg),
                _ => None,
            };
            if let Some(pre) = pre {
                fact += n * pre.fact;
                trsv += 4 * s * pre.trsv;
            }
            if variant == Variant::RgKc {
                spmm += n * kc.spmm_atwa;
                norm += n * kc.norm_g;
            }
        }
        Variant::UKf | Variant::PlKf | Variant::PhKf => {
            fact += kc.f.fact;
            trsv += n * 4 * kc.f.trsv + s * 2 * kc.f.trsv;
            spmv += n * 2 * kc.spmv_c + s * 2 * kc.spmv_c;
            if variant == Variant::PhKf {
                spmm += kc.spmm_cdct;
                fact += n * kc.ph.fact;
                trsv += s * 2 * kc.ph.trsv;
            }
        }
    }
    Ok(CostPrediction { variant, fact, trsv, spmv, spmm, norm, total: fact + trsv + spmv + spmm + norm })
}

/// Tag attached to factorization rows that may legitimately deviate.
pub const DENSE_FACT_EXEMPTION: &str = "dense-bk: factor pattern differs from the symbolic pattern";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconcileRow {
    pub variant: Variant,
    pub kernel: Kernel,
    pub predicted: u64,
    pub measured: u64,
    /// `(measured - predicted) / predicted`, or the raw difference when the
    /// prediction is zero.
    pub deviation: f64,
    pub exemption: Option<String>,
}

impl ReconcileRow {
    pub fn exact(&self) -> bool {
        self.predicted == self.measured
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub rows: Vec<ReconcileRow>,
}

impl Reconciliation {
    /// Every row agrees exactly or carries an exemption.
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.exact() || r.exemption.is_some())
    }

    pub fn failures(&self) -> Vec<&ReconcileRow> {
        self.rows.iter().filter(|r| !r.exact() && r.exemption.is_none()).collect()
    }

    pub const CSV_HEADER: &'static str = "variant,kernel,predicted,measured,deviation,exemption";

    /// Rows without the header.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{:e},{}",
                r.variant,
                r.kernel,
                r.predicted,
                r.measured,
                r.deviation,
                r.exemption.as_deref().unwrap_or("")
            )
            .unwrap();
        }
        s
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }
}

/// Compares a prediction with the ledger of the same run. Exact agreement
/// is required for every kernel; a factorization mismatch under the dense
/// backend is reported with [`DENSE_FACT_EXEMPTION`] instead of failing.
pub fn reconcile(pred: &CostPrediction, measured: &CostLedger, backend: Backend) -> Reconciliation {
    let rows = Kernel::ALL
        .iter()
        .map(|&k| {
            let (p, m) = (pred.get(k), measured.get(k));
            let diff = m as f64 - p as f64;
            let deviation = if p == 0 { diff } else { diff / p as f64 };
            let exemption = (p != m && k == Kernel::Fact && backend == Backend::DenseBk)
                .then(|| DENSE_FACT_EXEMPTION.to_string());
            ReconcileRow { variant: pred.variant, kernel: k, predicted: p, measured: m, deviation, exemption }
        })
        .collect();
    Reconciliation { rows }
}
