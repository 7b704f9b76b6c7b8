//! Conjugate gradient and BiCGSTAB over a minimal operator abstraction.
//!
//! Both solvers start from the zero vector and stop on the relative
//! residual `||b - A x|| / ||b||` of the unpreconditioned system. The work
//! per iteration is fixed so that the cost ledger can be reconciled with the
//! flop model exactly: CG does one operator and one preconditioner
//! application per iteration, BiCGSTAB two of each.

use serde::{Deserialize, Serialize};

use crate::costmodel::CostLedger;
use crate::error::{dim_err, Result};
use crate::factor::{self, FactorHandle};
use crate::sparse::{spmv, DiagMat, SparseMat};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>>;
}

pub trait Preconditioner {
    /// Returns `M^{-1} r`.
    fn apply(&self, r: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>>;
}

/// The identity preconditioner.
pub struct NoPreconditioner;

impl Preconditioner for NoPreconditioner {
    fn apply(&self, r: &[f64], _ledger: &mut CostLedger) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// An explicitly stored matrix; every product is charged as an spmv.
pub struct MatrixOperator<'a>(pub &'a SparseMat);

impl LinearOperator for MatrixOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
        spmv(self.0, x, false, ledger)
    }
}

/// Matrix-free `K_F = D - [C 0] F^{-1} [C^T; 0]`.
pub struct KfOperator<'a> {
    c: &'a SparseMat,
    f: &'a FactorHandle,
    d: &'a DiagMat,
}

impl KfOperator<'_> {
    pub fn n(&self) -> usize {
        self.c.ncols()
    }
}

/// Wraps the factorization of `F` (dimension `n + m1`) into the `m2 x m2`
/// reduced operator. Each application costs one `C^T` product, one
/// forward/backward solve with `F` and one `C` product.
pub fn make_kf_operator<'a>(c: &'a SparseMat, f: &'a FactorHandle, d: &'a DiagMat) -> Result<KfOperator<'a>> {
    if d.dim() != c.nrows() {
        return Err(dim_err(format!("K_F: D has dim {}, C has {} rows", d.dim(), c.nrows())));
    }
    if f.dim() < c.ncols() {
        return Err(dim_err(format!("K_F: F has dim {}, C has {} columns", f.dim(), c.ncols())));
    }
    Ok(KfOperator { c, f, d })
}

impl LinearOperator for KfOperator<'_> {
    fn dim(&self) -> usize {
        self.c.nrows()
    }

    fn apply(&self, v: &[f64], ledger: &mut CostLedger) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(dim_err("K_F operator: operand length"));
        }
        let n = self.n();
        let mut rhs = spmv(self.c, v, true, ledger)?;
        rhs.resize(self.f.dim(), 0.0);
        let y = factor::solve(self.f, &rhs, ledger)?;
        let cy = spmv(self.c, &y[..n], false, ledger)?;
        Ok(self.d.values().iter().zip(v).zip(cy).map(|((d, vi), ci)| d * vi - ci).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Breakdown {
    /// `p^T A p <= 0` in CG.
    NotPositiveDefinite,
    /// BiCGSTAB `rho` or `rhat^T v` vanished.
    Rho,
    /// BiCGSTAB stabilization parameter vanished.
    Omega,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_relres: f64,
    pub breakdown: Option<Breakdown>,
    /// Relative residual after each iteration.
    pub history: Vec<f64>,
}

impl KrylovReport {
    fn trivial() -> Self {
        Self { iterations: 0, converged: true, final_relres: 0.0, breakdown: None, history: Vec::new() }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Default iteration cap.
pub fn default_maxit(dim: usize) -> usize {
    10 * dim.max(1)
}

/// Left-preconditioned conjugate gradient. Breakdowns are reported in the
/// returned report together with the last finite iterate.
pub fn pcg(
    op: &dyn LinearOperator,
    rhs: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
    ledger: &mut CostLedger,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(dim_err("pcg: rhs length"));
    }
    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 || tol >= 1.0 {
        return Ok((x, KrylovReport::trivial()));
    }
    let mut report = KrylovReport { iterations: 0, converged: false, final_relres: 1.0, breakdown: None, history: Vec::new() };
    let mut r = rhs.to_vec();
    let mut z = precond.apply(&r, ledger)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        let q = op.apply(&p, ledger)?;
        report.iterations = it;
        let pq = dot(&p, &q);
        if !pq.is_finite() || !rz.is_finite() {
            report.breakdown = Some(Breakdown::NonFinite);
            return Ok((x, report));
        }
        if pq <= 0.0 {
            report.breakdown = Some(Breakdown::NotPositiveDefinite);
            return Ok((x, report));
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let relres = norm(&r) / bnorm;
        report.final_relres = relres;
        report.history.push(relres);
        if relres <= tol {
            report.converged = true;
            return Ok((x, report));
        }
        if it == maxit {
            break;
        }
        z = precond.apply(&r, ledger)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok((x, report))
}

/// Right-preconditioned BiCGSTAB.
pub fn bicgstab(
    op: &dyn LinearOperator,
    rhs: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
    ledger: &mut CostLedger,
) -> Result<(Vec<f64>, KrylovReport)> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(dim_err("bicgstab: rhs length"));
    }
    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 || tol >= 1.0 {
        return Ok((x, KrylovReport::trivial()));
    }
    let mut report = KrylovReport { iterations: 0, converged: false, final_relres: 1.0, breakdown: None, history: Vec::new() };
    let mut r = rhs.to_vec();
    let rhat = rhs.to_vec();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    for it in 1..=maxit {
        let rho = dot(&rhat, &r);
        if !rho.is_finite() || rho.abs() < f64::MIN_POSITIVE {
            report.breakdown = Some(if rho.is_finite() { Breakdown::Rho } else { Breakdown::NonFinite });
            return Ok((x, report));
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        let phat = precond.apply(&p, ledger)?;
        v = op.apply(&phat, ledger)?;
        let rv = dot(&rhat, &v);
        let s: Vec<f64>;
        if rv == 0.0 || !rv.is_finite() {
            report.iterations = it;
            report.breakdown = Some(Breakdown::Rho);
            return Ok((x, report));
        }
        alpha = rho / rv;
        s = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        let shat = precond.apply(&s, ledger)?;
        let t = op.apply(&shat, ledger)?;
        report.iterations = it;
        let srel = norm(&s) / bnorm;
        if srel <= tol {
            axpy(&mut x, alpha, &phat);
            report.final_relres = srel;
            report.history.push(srel);
            report.converged = true;
            return Ok((x, report));
        }
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            axpy(&mut x, alpha, &phat);
            report.final_relres = srel;
            report.history.push(srel);
            report.breakdown = Some(if tt == 0.0 { Breakdown::Omega } else { Breakdown::NonFinite });
            return Ok((x, report));
        }
        omega = dot(&t, &s) / tt;
        axpy(&mut x, alpha, &phat);
        axpy(&mut x, omega, &shat);
        r = s.iter().zip(&t).map(|(si, ti)| si - omega * ti).collect();
        let relres = norm(&r) / bnorm;
        report.final_relres = relres;
        report.history.push(relres);
        if !relres.is_finite() {
            report.breakdown = Some(Breakdown::NonFinite);
            return Ok((x, report));
        }
        if relres <= tol {
            report.converged = true;
            return Ok((x, report));
        }
        if omega.abs() < f64::MIN_POSITIVE {
            report.breakdown = Some(Breakdown::Omega);
            return Ok((x, report));
        }
        rho_old = rho;
    }
    Ok((x, report))
}
