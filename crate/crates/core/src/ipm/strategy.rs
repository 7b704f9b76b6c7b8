//! The seven KKT strategies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kkt::{self, Direction, Residuals, LABEL_F};
use super::problem::QpProblem;
use super::{IpmConfig, IpmState};
use crate::costmodel::CostLedger;
use crate::error::{Error, Result};
use crate::factor::{ldlt_factor, FactorHandle, LdltOptions};
use crate::krylov::{bicgstab, default_maxit, make_kf_operator, pcg, KrylovReport, MatrixOperator};
use crate::precond::{build_pcp, build_pl, build_prg, PhFamily, PrecondHandle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Direct `LDL^T` of `K_C` every iteration.
    DKc,
    /// Unpreconditioned BiCGSTAB on `K_C`.
    UKc,
    /// BiCGSTAB on `K_C` with the constraint preconditioner.
    CpKc,
    /// BiCGSTAB on `K_C` with the augmented Lagrangian preconditioner.
    RgKc,
    /// Unpreconditioned CG on `K_F`.
    UKf,
    /// CG on `K_F` preconditioned by `D`.
    PlKf,
    /// CG on `K_F` preconditioned by `D + T`.
    PhKf,
}

impl Variant {
    pub const ALL: [Variant; 7] =
        [Variant::DKc, Variant::UKc, Variant::CpKc, Variant::RgKc, Variant::UKf, Variant::PlKf, Variant::PhKf];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::DKc => "d-kc",
            Variant::UKc => "u-kc",
            Variant::CpKc => "cp-kc",
            Variant::RgKc => "rg-kc",
            Variant::UKf => "u-kf",
            Variant::PlKf => "pl-kf",
            Variant::PhKf => "ph-kf",
        }
    }

    /// Works on the inequality-constraint reduced system.
    pub fn is_kf(self) -> bool {
        matches!(self, Variant::UKf | Variant::PlKf | Variant::PhKf)
    }

    pub fn is_iterative(self) -> bool {
        self != Variant::DKc
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidProblem(format!("unknown variant '{s}'")))
    }
}

/// Per-solve persistent data: the factorization of `F` and, for PH-KF, the
/// matrix `T`.
#[derive(Clone, Debug)]
pub struct StrategyContext {
    pub variant: Variant,
    pub opts: LdltOptions,
    f: Option<FactorHandle>,
    ph: Option<PhFamily>,
}

impl StrategyContext {
    /// Setup phase. K_F strategies factorize `F` here, once.
    pub fn setup(p: &QpProblem, cfg: &IpmConfig, ledger: &mut CostLedger) -> Result<Self> {
        let opts = cfg.ldlt_options(p.n());
        let variant = cfg.strategy;
        let (f, ph) = if variant.is_kf() {
            let f = ldlt_factor(&kkt::build_f(p)?, &opts, LABEL_F, ledger)?;
            let ph = match variant {
                Variant::PhKf => Some(PhFamily::new(&p.cmat, &p.h, cfg.ph_mode, ledger)?),
                _ => None,
            };
            (Some(f), ph)
        } else {
            (None, None)
        };
        Ok(Self { variant, opts, f, ph })
    }

    pub fn f(&self) -> Option<&FactorHandle> {
        self.f.as_ref()
    }
}

/// A direction plus the Krylov bookkeeping of the solve that produced it.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub direction: Direction,
    pub n_kr: usize,
    pub krylov: Option<KrylovReport>,
    /// The inexact direction, kept when consistent-iterates mode replaced it.
    pub inexact: Option<Direction>,
}

fn maxit(cfg: &IpmConfig, dim: usize) -> usize {
    cfg.krylov_maxit.unwrap_or_else(|| default_maxit(dim))
}

fn kc_iterative(
    p: &QpProblem,
    st: &IpmState,
    res: &Residuals,
    cfg: &IpmConfig,
    ctx: &StrategyContext,
    ledger: &mut CostLedger,
) -> Result<(Direction, KrylovReport)> {
    let d = kkt::scaling(st)?;
    let ra = kkt::r_a(st, res);
    let g = kkt::build_g(p, &d, ledger)?;
    let kc = kkt::kc_from_g(p, &g)?;
    let precond = match ctx.variant {
        Variant::UKc => PrecondHandle::identity(kc.nrows()),
        Variant::CpKc => build_pcp(&g, &p.a, &ctx.opts, ledger)?,
        Variant::RgKc => build_prg(&g, &p.a, ledger)?,
        other => unreachable!("{other} is not a K_C Krylov strategy"),
    };
    let rhs = kkt::kc_rhs(p, &d, res, &ra, ledger)?;
    let (mut dx, report) =
        bicgstab(&MatrixOperator(&kc), &rhs, &precond, cfg.krylov_tol, maxit(cfg, kc.nrows()), ledger)?;
    let dlam = dx.split_off(p.n());
    let dnu = kkt::kc_recover_dnu(p, &d, &ra, &dx, ledger)?;
    let ds = kkt::recover_ds(st, &d, res, &dnu);
    Ok((Direction { dx, dlam, dnu, ds }, report))
}

fn kf_iterative(
    p: &QpProblem,
    st: &IpmState,
    res: &Residuals,
    cfg: &IpmConfig,
    ctx: &StrategyContext,
    ledger: &mut CostLedger,
) -> Result<(Direction, KrylovReport)> {
    let f = ctx.f.as_ref().expect("K_F strategies factorize F during setup");
    let d = kkt::scaling(st)?;
    let ra = kkt::r_a(st, res);
    let precond = match ctx.variant {
        Variant::UKf => PrecondHandle::identity(p.m2()),
        Variant::PlKf => build_pl(&d)?,
        Variant::PhKf => ctx.ph.as_ref().expect("PH-KF keeps T from setup").build(&d, ledger)?,
        other => unreachable!("{other} is not a K_F strategy"),
    };
    let rnu = kkt::kf_rhs(p, f, res, &ra, ledger)?;
    let op = make_kf_operator(&p.cmat, f, &d)?;
    let (dnu, report) = pcg(&op, &rnu, &precond, cfg.krylov_tol, maxit(cfg, p.m2()), ledger)?;
    let (dx, dlam) = kkt::kf_recover(p, f, res, &dnu, ledger)?;
    let ds = kkt::recover_ds(st, &d, res, &dnu);
    Ok((Direction { dx, dlam, dnu, ds }, report))
}

/// Computes the Newton direction at `st` from `st.residuals`.
///
/// In consistent-iterates mode the strategy's own solve is performed and
/// charged, then its direction is replaced by a direct `K_C` solve whose
/// work goes to a scratch ledger.
pub fn newton_step(
    p: &QpProblem,
    st: &IpmState,
    cfg: &IpmConfig,
    ctx: &StrategyContext,
    ledger: &mut CostLedger,
) -> Result<StepOutcome> {
    let res = &st.residuals;
    let (direction, krylov) = match ctx.variant {
        Variant::DKc => (kkt::direct_kc_direction(p, st, res, &ctx.opts, ledger)?, None),
        Variant::UKc | Variant::CpKc | Variant::RgKc => {
            let (dir, rep) = kc_iterative(p, st, res, cfg, ctx, ledger)?;
            (dir, Some(rep))
        }
        Variant::UKf | Variant::PlKf | Variant::PhKf => {
            let (dir, rep) = kf_iterative(p, st, res, cfg, ctx, ledger)?;
            (dir, Some(rep))
        }
    };
    let n_kr = krylov.as_ref().map_or(0, |r| r.iterations);
    if cfg.consistent_iterates && ctx.variant.is_iterative() {
        let mut scratch = CostLedger::new();
        let exact = kkt::direct_kc_direction(p, st, res, &ctx.opts, &mut scratch)?;
        return Ok(StepOutcome { direction: exact, n_kr, krylov, inexact: Some(direction) });
    }
    Ok(StepOutcome { direction, n_kr, krylov, inexact: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_tags_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.as_str()));
        }
        assert!("bogus".parse::<Variant>().is_err());
        assert_eq!(Variant::ALL.iter().filter(|v| v.is_kf()).count(), 3);
    }
}
