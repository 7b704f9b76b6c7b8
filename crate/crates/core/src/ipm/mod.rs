//! Primal-dual path-following interior point method.
//!
//! One linear solve per iteration with fixed centering `sigma`, a
//! fraction-to-boundary rule with separate primal and dual step lengths, and
//! seven interchangeable strategies for the Newton system.

mod kkt;
mod problem;
mod strategy;

pub use kkt::{
    build_f, build_g, build_kc, check_direction, direct_kc_direction, kc_from_g, r_a, residuals, scaling,
    Direction, DirectionCheck, Residuals, LABEL_F, LABEL_KC,
};
pub use problem::{row_rank, ProblemManifest, QpProblem};
pub use strategy::{newton_step, StepOutcome, StrategyContext, Variant};

use serde::{Deserialize, Serialize};

use crate::costmodel::CostLedger;
use crate::error::{Error, Result};
use crate::factor::{cholesky_factor, Backend, LdltOptions, Ordering};
use crate::precond::PhMode;
use crate::sparse::{two_norm_estimate, SparseMat};
use kkt::{norm2, norm_inf};

/// Current primal-dual iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmState {
    pub x: Vec<f64>,
    pub lam: Vec<f64>,
    pub nu: Vec<f64>,
    pub s: Vec<f64>,
    /// `s^T nu / m2`.
    pub mu: f64,
    pub k: usize,
    pub residuals: Residuals,
}

impl IpmState {
    /// `x = 0`, `lam = 0`, `nu = e`, `s = |C x - d| + e`.
    pub fn initial(p: &QpProblem) -> Self {
        let x = vec![0.0; p.n()];
        let cx = p.cmat.mul_vec(&x, false);
        let s: Vec<f64> = cx.iter().zip(&p.d).map(|(v, d)| (v - d).abs() + 1.0).collect();
        let nu = vec![1.0; p.m2()];
        let mu = complementarity(&s, &nu);
        Self { x, lam: vec![0.0; p.m1()], nu, s, mu, k: 0, residuals: Residuals::default() }
    }
}

fn complementarity(s: &[f64], nu: &[f64]) -> f64 {
    s.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>() / s.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmConfig {
    pub strategy: Variant,
    pub krylov_tol: f64,
    /// Krylov iteration cap; `None` means ten times the system dimension.
    pub krylov_maxit: Option<usize>,
    pub ipm_tol: f64,
    pub max_iters: usize,
    pub sigma: f64,
    pub tau_boundary: f64,
    pub regularization_rho_scale: f64,
    pub consistent_iterates: bool,
    pub ph_mode: PhMode,
    pub backend: Backend,
    /// Static quasi-definite shift for the sparse factorization backend.
    pub factor_reg: f64,
    pub ordering: Ordering,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            strategy: Variant::PlKf,
            krylov_tol: 1e-3,
            krylov_maxit: None,
            ipm_tol: 1e-8,
            max_iters: 100,
            sigma: 0.1,
            tau_boundary: 0.995,
            regularization_rho_scale: 1e-4,
            consistent_iterates: false,
            ph_mode: PhMode::DiagH,
            backend: Backend::SparseRegularized,
            factor_reg: 0.0,
            ordering: Ordering::Natural,
        }
    }
}

impl IpmConfig {
    pub fn with_strategy(strategy: Variant) -> Self {
        Self { strategy, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidProblem(format!("invalid configuration: {m}")));
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad("sigma must lie in (0, 1)");
        }
        if !(self.tau_boundary > 0.0 && self.tau_boundary < 1.0) {
            return bad("tau_boundary must lie in (0, 1)");
        }
        if !(self.krylov_tol > 0.0) || !(self.ipm_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.factor_reg < 0.0 {
            return bad("factor_reg must be non-negative");
        }
        Ok(())
    }

    pub fn ldlt_options(&self, split: usize) -> LdltOptions {
        LdltOptions { backend: self.backend, reg: self.factor_reg, split, ordering: self.ordering }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IpmStatus {
    Optimal,
    MaxIters,
    LinearSolveFailure,
}

/// One accepted IPM step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// `mu` before the step.
    pub mu: f64,
    pub alpha_primal: f64,
    pub alpha_dual: f64,
    pub n_kr: usize,
    pub krylov_converged: bool,
    pub krylov_relres: f64,
    pub krylov_breakdown: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IpmResult {
    pub state: IpmState,
    pub objective: f64,
    pub n_ipm_iters: usize,
    pub per_iter_krylov: Vec<usize>,
    pub ledger: CostLedger,
    pub status: IpmStatus,
    pub trace: Vec<IterRecord>,
    /// `rho` when `H` had to be shifted to `H + rho I`.
    pub regularization: Option<f64>,
    pub diagnostics: Option<String>,
}

/// Largest `alpha` in `(0, 1]` with `v + alpha dv >= (1 - tau) v`.
fn max_step(v: &[f64], dv: &[f64], tau: f64) -> f64 {
    v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(vi, di)| tau * vi / -di).fold(1.0, f64::min)
}

/// Fraction-to-boundary step lengths `(alpha_primal, alpha_dual)` for the
/// slacks and the inequality multipliers.
pub fn step_lengths(st: &IpmState, dnu: &[f64], ds: &[f64], tau: f64) -> (f64, f64) {
    (max_step(&st.s, ds, tau), max_step(&st.nu, dnu, tau))
}

/// Returns `H + rho I` with `rho = scale * ||H||_2` when `H` is not numerically
/// positive definite, `None` otherwise. The probing factorization is not
/// charged.
pub fn regularize_hessian(h: &SparseMat, scale: f64) -> Result<Option<(SparseMat, f64)>> {
    let mut scratch = CostLedger::new();
    match cholesky_factor(h, "H", &mut scratch) {
        Ok(_) => Ok(None),
        Err(Error::NotPositiveDefinite { .. }) => {
            let norm = two_norm_estimate(h, 100);
            let rho = if norm > 0.0 { scale * norm } else { scale };
            let shifted = h.add(1.0, &SparseMat::identity(h.nrows()), rho)?;
            Ok(Some((shifted, rho)))
        }
        Err(e) => Err(e),
    }
}

struct Scales {
    mu0: f64,
    dual: f64,
    primal_eq: f64,
    primal_ineq: f64,
}

/// Termination test. Inequality feasibility and complementarity are measured
/// on the original constraints through `C x - d = r_i + s`: the violation
/// `(d - C x)_+` and the mean of `|(C x - d)_j| nu_j`. With exact directions
/// `r_i` vanishes after a full primal step and both reduce to the usual
/// slack-based measures; inexact directions leave an `r_i` component on
/// inactive constraints, which these measures ignore.
fn converged(st: &IpmState, res: &Residuals, sc: &Scales, tol: f64) -> bool {
    let m2 = st.s.len() as f64;
    let gap_tol = tol * (1.0 + sc.mu0);
    let mut violation = 0.0f64;
    let mut gap = 0.0;
    for j in 0..st.s.len() {
        let slack = res.r_i[j] + st.s[j];
        violation = violation.max(-slack);
        gap += slack.abs() * st.nu[j];
    }
    st.mu <= gap_tol
        && gap / m2 <= gap_tol
        && norm_inf(&res.r_g) <= tol * sc.dual
        && norm_inf(&res.r_e) <= tol * sc.primal_eq
        && violation <= tol * sc.primal_ineq
}

fn failure(
    st: IpmState,
    original: &QpProblem,
    ledger: CostLedger,
    per_iter_krylov: Vec<usize>,
    trace: Vec<IterRecord>,
    regularization: Option<f64>,
    msg: String,
) -> IpmResult {
    IpmResult {
        objective: original.objective(&st.x),
        n_ipm_iters: per_iter_krylov.len(),
        state: st,
        per_iter_krylov,
        ledger,
        status: IpmStatus::LinearSolveFailure,
        trace,
        regularization,
        diagnostics: Some(msg),
    }
}

/// Runs the interior point method.
pub fn solve_qp(p: &QpProblem, cfg: &IpmConfig) -> Result<IpmResult> {
    solve_qp_observed(p, cfg, &mut |_, _| {})
}

/// [`solve_qp`] that hands every iterate to `observe` just before its Newton
/// system is solved. The problem passed is the one actually solved, i.e.
/// after any Hessian regularization.
pub fn solve_qp_observed(
    p: &QpProblem,
    cfg: &IpmConfig,
    observe: &mut dyn FnMut(&QpProblem, &IpmState),
) -> Result<IpmResult> {
    p.validate()?;
    cfg.validate()?;
    let (work, regularization) = match regularize_hessian(&p.h, cfg.regularization_rho_scale)? {
        Some((h, rho)) => (QpProblem { h, ..p.clone() }, Some(rho)),
        None => (p.clone(), None),
    };
    let mut ledger = CostLedger::new();
    let mut st = IpmState::initial(&work);
    let scales = Scales {
        mu0: st.mu,
        dual: 1.0 + norm_inf(&work.c),
        primal_eq: 1.0 + norm_inf(&work.b),
        primal_ineq: 1.0 + norm_inf(&work.d),
    };
    let mut per_iter_krylov = Vec::new();
    let mut trace = Vec::new();

    let ctx = match StrategyContext::setup(&work, cfg, &mut ledger) {
        Ok(c) => c,
        Err(e) => {
            return Ok(failure(st, p, ledger, per_iter_krylov, trace, regularization, format!("setup: {e}")));
        }
    };

    let mut status = IpmStatus::MaxIters;
    loop {
        // Residuals feed the next Newton system; they are charged only if a
        // step is actually taken.
        let mut scratch = CostLedger::new();
        st.residuals = residuals(&work, &st, cfg.sigma * st.mu, &mut scratch)?;
        if converged(&st, &st.residuals, &scales, cfg.ipm_tol) {
            status = IpmStatus::Optimal;
            break;
        }
        if st.k >= cfg.max_iters {
            break;
        }
        ledger.absorb(&scratch);
        observe(&work, &st);
        let outcome = match newton_step(&work, &st, cfg, &ctx, &mut ledger) {
            Ok(o) => o,
            Err(e) => {
                let msg = format!("iteration {}: {e}", st.k);
                return Ok(failure(st, p, ledger, per_iter_krylov, trace, regularization, msg));
            }
        };
        let dir = &outcome.direction;
        if !dir.is_finite() {
            let msg = format!("iteration {}: non-finite direction", st.k);
            return Ok(failure(st, p, ledger, per_iter_krylov, trace, regularization, msg));
        }
        let (ap, ad) = step_lengths(&st, &dir.dnu, &dir.ds, cfg.tau_boundary);
        let rep = outcome.krylov.as_ref();
        trace.push(IterRecord {
            k: st.k,
            mu: st.mu,
            alpha_primal: ap,
            alpha_dual: ad,
            n_kr: outcome.n_kr,
            krylov_converged: rep.is_none_or(|r| r.converged),
            krylov_relres: rep.map_or(0.0, |r| r.final_relres),
            krylov_breakdown: rep.is_some_and(|r| r.breakdown.is_some()),
        });
        if cfg.strategy.is_iterative() {
            per_iter_krylov.push(outcome.n_kr);
        }
        for (x, d) in st.x.iter_mut().zip(&dir.dx) {
            *x += ap * d;
        }
        for (s, d) in st.s.iter_mut().zip(&dir.ds) {
            *s += ap * d;
        }
        for (l, d) in st.lam.iter_mut().zip(&dir.dlam) {
            *l += ad * d;
        }
        for (v, d) in st.nu.iter_mut().zip(&dir.dnu) {
            *v += ad * d;
        }
        st.mu = complementarity(&st.s, &st.nu);
        st.k += 1;
    }
    ledger.n_ipm = st.k;
    ledger.n_kr_per_iter = per_iter_krylov.clone();
    Ok(IpmResult {
        objective: p.objective(&st.x),
        n_ipm_iters: st.k,
        state: st,
        per_iter_krylov,
        ledger,
        status,
        trace,
        regularization,
        diagnostics: None,
    })
}

/// Euclidean norms of the residual blocks, for reports.
pub fn residual_norms(res: &Residuals) -> [f64; 4] {
    [norm2(&res.r_g), norm2(&res.r_e), norm2(&res.r_i), norm2(&res.r_c)]
}
