//! Preconditioners for the reduced systems.
//!
//! * `P_L = D` and `P_H = D + T` act on the SPD inequality-constraint reduced
//!   system `K_F`. `T` is `C diag(H)^{-1} C^T` in practice ([`PhMode::DiagH`])
//!   or `C H^{-1} C^T` for spectral checks ([`PhMode::ExactH`]).
//! * The constraint preconditioner and the augmented Lagrangian block
//!   diagonal act on the augmented system `K_C = [-G, A^T; A, 0]` with
//!   `G = H + C^T D^{-1} C`.
//!
//! `K_C` carries `-G` in its leading block, so both `K_C` preconditioners are
//! built with the same sign: the constraint preconditioner is
//! `[-diag(G), A^T; A, 0]`, and the block-diagonal one is applied as
//! `-blockdiag(G + A^T A / gamma, gamma I)^{-1}`. With these signs the
//! preconditioned spectra are the classical ones.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::costmodel::CostLedger;
use crate::error::{dim_err, Error, Result};
use crate::factor::{self, cholesky_factor, ldlt_factor, FactorHandle, LdltOptions};
use crate::krylov::Preconditioner;
use crate::sparse::{frob_count, spmm_bdbt, spmm_btdb, two_norm_estimate, DiagMat, SparseMat, Symmetry};

/// Power iterations used for the norm estimates behind `gamma`.
pub const NORM_ITERS: usize = 100;

pub const LABEL_PCP: &str = "P_CP";
pub const LABEL_PRG: &str = "P_RG";
pub const LABEL_PH: &str = "P_H";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    None,
    LowDof,
    HighDof,
    Constraint,
    AugLagrangian,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhMode {
    #[default]
    DiagH,
    ExactH,
}

#[derive(Clone, Debug)]
enum Payload {
    Identity,
    Diagonal(DiagMat),
    Factor { f: FactorHandle, negate: bool },
}

#[derive(Clone, Debug)]
pub struct PrecondHandle {
    kind: PrecondKind,
    dim: usize,
    payload: Payload,
    gamma: Option<f64>,
}

impl PrecondHandle {
    pub fn identity(dim: usize) -> Self {
        Self { kind: PrecondKind::None, dim, payload: Payload::Identity, gamma: None }
    }

    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The weight `gamma` of the augmented Lagrangian preconditioner.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn factor(&self) -> Option<&FactorHandle> {
        match &self.payload {
            Payload::Factor { f, .. } => Some(f),
            _ => None,
        }
    }

    /// Returns `P^{-1} r`.
    pub fn apply(&self, r: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
        if r.len() != self.dim {
            return Err(dim_err(format!("preconditioner of dim {} applied to length {}", self.dim, r.len())));
        }
        match &self.payload {
            Payload::Identity => Ok(r.to_vec()),
            Payload::Diagonal(d) => Ok(r.iter().zip(d.values()).map(|(ri, di)| ri / di).collect()),
            Payload::Factor { f, negate } => {
                let mut x = factor::solve(f, r, ledger)?;
                if *negate {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
                Ok(x)
            }
        }
    }
}

impl Preconditioner for PrecondHandle {
    fn apply(&self, r: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
        PrecondHandle::apply(self, r, ledger)
    }
}

/// `P_L = D`. Its application is a diagonal scaling and is not charged.
pub fn build_pl(d: &DiagMat) -> Result<PrecondHandle> {
    if !d.is_positive() {
        return Err(Error::InvalidPreconditioner("P_L requires a positive diagonal".into()));
    }
    Ok(PrecondHandle { kind: PrecondKind::LowDof, dim: d.dim(), payload: Payload::Diagonal(d.clone()), gamma: None })
}

/// The iteration-independent part `T` of `P_H`, built once per solve.
#[derive(Clone, Debug)]
pub struct PhFamily {
    t: SparseMat,
    mode: PhMode,
}

impl PhFamily {
    /// Forms `T`. In diag-h mode this is one charged `spmm`; exact-h mode
    /// forms `C H^{-1} C^T` densely and is meant for desk-scale checks.
    pub fn new(c: &SparseMat, h: &SparseMat, mode: PhMode, ledger: &mut CostLedger) -> Result<Self> {
        if h.nrows() != c.ncols() || !h.is_square() {
            return Err(dim_err("P_H: H must be square with as many rows as C has columns"));
        }
        let t = match mode {
            PhMode::DiagH => {
                let diag = h.diagonal();
                if diag.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::InvalidPreconditioner("diag(H) must be positive".into()));
                }
                let dh = DiagMat::new(diag.iter().map(|v| 1.0 / v).collect())?;
                spmm_bdbt(c, &dh, ledger)?
            }
            PhMode::ExactH => {
                let hinv = h
                    .to_dense()
                    .cholesky()
                    .ok_or_else(|| Error::InvalidPreconditioner("exact-h mode needs an SPD Hessian".into()))?
                    .inverse();
                let cd = c.to_dense();
                let t: DMatrix<f64> = &cd * hinv * cd.transpose();
                SparseMat::from_dense(&((&t + t.transpose()) * 0.5), Symmetry::SymmetricLower)?
            }
        };
        Ok(Self { t, mode })
    }

    pub fn mode(&self) -> PhMode {
        self.mode
    }

    pub fn t(&self) -> &SparseMat {
        &self.t
    }

    /// Pattern of `D + T`.
    pub fn pattern(&self) -> Result<SparseMat> {
        self.t.add(1.0, &SparseMat::identity(self.t.nrows()), 1.0).map(|m| m.pattern())
    }

    /// `P_H = D + T`, Cholesky-factorized.
    pub fn build(&self, d: &DiagMat, ledger: &mut CostLedger) -> Result<PrecondHandle> {
        if d.dim() != self.t.nrows() {
            return Err(dim_err("P_H: D does not match C"));
        }
        if !d.is_positive() {
            return Err(Error::InvalidPreconditioner("P_H requires a positive D".into()));
        }
        let p = self.t.add(1.0, &d.to_sparse(), 1.0)?;
        let f = cholesky_factor(&p, LABEL_PH, ledger)?;
        Ok(PrecondHandle { kind: PrecondKind::HighDof, dim: d.dim(), payload: Payload::Factor { f, negate: false }, gamma: None })
    }
}

/// One-shot `P_H` construction (setup and factorization together).
pub fn build_ph(d: &DiagMat, c: &SparseMat, h: &SparseMat, mode: PhMode, ledger: &mut CostLedger) -> Result<PrecondHandle> {
    PhFamily::new(c, h, mode, ledger)?.build(d, ledger)
}

fn check_kc_blocks(g: &SparseMat, a: &SparseMat) -> Result<()> {
    if !g.is_symmetric() {
        return Err(dim_err("G must be symmetric-lower"));
    }
    if a.ncols() != g.ncols() {
        return Err(dim_err("A and G do not conform"));
    }
    Ok(())
}

/// Symmetric-lower `[B11, 0; B21, B22]` from symmetric-lower diagonal blocks
/// and a general off-diagonal block.
pub(crate) fn assemble_saddle(b11: &SparseMat, b21: Option<&SparseMat>, b22: Option<&SparseMat>) -> Result<SparseMat> {
    let n = b11.ncols();
    let m = b21.map(|b| b.nrows()).or(b22.map(|b| b.nrows())).unwrap_or(0);
    let mut t: Vec<(usize, usize, f64)> = b11.triplets().collect();
    if let Some(b) = b21 {
        t.extend(b.triplets().map(|(i, j, v)| (n + i, j, v)));
    }
    if let Some(b) = b22 {
        t.extend(b.triplets().map(|(i, j, v)| (n + i, n + j, v)));
    }
    SparseMat::from_triplets(n + m, n + m, &t, Symmetry::SymmetricLower)
}

/// Pattern of the constraint preconditioner.
pub fn pcp_pattern(n: usize, a: &SparseMat) -> Result<SparseMat> {
    assemble_saddle(&SparseMat::identity(n), Some(&a.pattern()), None)
}

/// Constraint preconditioner `[-diag(G), A^T; A, 0]`, factorized with
/// `ldlt_factor`.
pub fn build_pcp(g: &SparseMat, a: &SparseMat, opts: &LdltOptions, ledger: &mut CostLedger) -> Result<PrecondHandle> {
    check_kc_blocks(g, a)?;
    let e = g.diagonal();
    if e.iter().any(|&v| v == 0.0) {
        return Err(Error::InvalidPreconditioner("diag(G) has a zero entry".into()));
    }
    let neg_e = SparseMat::from_diag(&e.iter().map(|v| -v).collect::<Vec<_>>());
    let p = assemble_saddle(&neg_e, Some(a), None)?;
    let f = ldlt_factor(&p, &LdltOptions { split: g.ncols(), ..*opts }, LABEL_PCP, ledger)?;
    Ok(PrecondHandle {
        kind: PrecondKind::Constraint,
        dim: p.nrows(),
        payload: Payload::Factor { f, negate: false },
        gamma: None,
    })
}

/// `gamma = ||A||^2 / ||G||`, charging `nz(G)` to the norm counter.
pub fn rg_gamma(g: &SparseMat, a: &SparseMat, ledger: &mut CostLedger) -> Result<f64> {
    frob_count(g, ledger);
    let gn = two_norm_estimate(g, NORM_ITERS);
    let an = two_norm_estimate(a, NORM_ITERS);
    if !(gn > 0.0) || !(an > 0.0) {
        return Err(Error::InvalidPreconditioner("augmented Lagrangian weight needs nonzero A and G".into()));
    }
    Ok(an * an / gn)
}

/// `[G + A^T W^{-1} A, 0; 0, W]` with `W = gamma I`.
pub fn prg_matrix(g: &SparseMat, a: &SparseMat, gamma: f64, ledger: &mut CostLedger) -> Result<SparseMat> {
    let dw = DiagMat::constant(a.nrows(), 1.0 / gamma);
    let ata = spmm_btdb(a, &dw, ledger)?;
    let lead = g.add(1.0, &ata, 1.0)?;
    let w = SparseMat::from_diag(&vec![gamma; a.nrows()]);
    assemble_saddle(&lead, None, Some(&w))
}

/// Augmented Lagrangian block-diagonal preconditioner.
pub fn build_prg(g: &SparseMat, a: &SparseMat, ledger: &mut CostLedger) -> Result<PrecondHandle> {
    check_kc_blocks(g, a)?;
    let gamma = rg_gamma(g, a, ledger)?;
    let m = prg_matrix(g, a, gamma, ledger)?;
    let f = cholesky_factor(&m, LABEL_PRG, ledger)?;
    Ok(PrecondHandle {
        kind: PrecondKind::AugLagrangian,
        dim: m.nrows(),
        payload: Payload::Factor { f, negate: true },
        gamma: Some(gamma),
    })
}
