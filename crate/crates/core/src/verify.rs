//! Seeded property suites: rank lemmas, preconditioned spectra, cost-model
//! reconciliation, the factorize-once property and direction recovery.
//!
//! Each suite returns a [`VerifyReport`] of named checks; the failing ones
//! form the machine-readable failure list.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costmodel::{predict_variant, reconcile, KernelCosts};
use crate::error::{Error, Result};
use crate::factor::Backend;
use crate::ipm::{
    check_direction, newton_step, solve_qp, solve_qp_observed, IpmConfig, IpmStatus, QpProblem, StrategyContext,
    Variant, LABEL_F, LABEL_KC,
};
use crate::precond::{LABEL_PCP, LABEL_PH, LABEL_PRG};
use crate::problems::{gen_syqp, SyQpSpec};
use crate::spectral::{check_rank_lemmas, dense_kf, dense_ph_exact, preconditioned_spectrum};
use crate::CostLedger;

/// Instance shapes `(n, m1, m2)` of the spectrum suite.
pub const THEOREM_SHAPES: [(usize, usize, usize); 3] = [(12, 3, 12), (16, 8, 16), (20, 4, 10)];
/// Instances per shape in the spectrum suite.
pub const THEOREM_INSTANCES: usize = 50;
/// Random `(H, A)` pairs in the rank-lemma suite.
pub const LEMMA_INSTANCES: usize = 100;
pub const LEMMA_MAX_N: usize = 24;
pub const LEMMA_TOL: f64 = 1e-10;
/// Distance from one that counts as a unit eigenvalue.
pub const UNIT_TOL: f64 = 1e-8;
/// `m1` values of the `n = 64` synthetic grid.
pub const SYQP64_GRID: [usize; 9] = [1, 8, 16, 24, 32, 40, 48, 56, 64];
pub const RECOVERY_RELRES: f64 = 1e-6;
pub const RECOVERY_COMPLEMENTARITY: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lemmas,
    Theorems,
    Costs,
    FactorizeOnce,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Lemmas, Suite::Theorems, Suite::Costs, Suite::FactorizeOnce];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Lemmas => "lemmas",
            Suite::Theorems => "theorems",
            Suite::Costs => "costs",
            Suite::FactorizeOnce => "factorize-once",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::InvalidProblem(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// `{suite, seed, total, passed, failures: [...]}`.
    pub fn failure_json(&self) -> serde_json::Value {
        serde_json::json!({
            "suite": self.suite,
            "seed": self.seed,
            "total": self.checks.len(),
            "passed": self.checks.len() - self.failures().len(),
            "failures": self.failures(),
        })
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Lemmas => lemma_checks(seed)?,
        Suite::Theorems => theorem_checks(seed)?,
        Suite::Costs => cost_checks(seed)?,
        Suite::FactorizeOnce => factorize_once_checks(seed)?,
    };
    Ok(VerifyReport { suite: suite.to_string(), seed, checks })
}

/// Dense random data for the spectral checks.
#[derive(Clone, Debug)]
pub struct DenseInstance {
    pub h: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: Vec<f64>,
}

fn instance_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| 2.0 * rng.random::<f64>() - 1.0)
}

/// `H = B B^T / n + I/2` (SPD), uniform `A` and `C` in `[-1, 1)` and
/// `D = 10^U(-2, 2)`.
pub fn random_instance(rng: &mut ChaCha8Rng, n: usize, m1: usize, m2: usize) -> DenseInstance {
    let b = uniform_matrix(rng, n, n);
    let h = &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * 0.5;
    let h = (&h + h.transpose()) * 0.5;
    let a = uniform_matrix(rng, m1, n);
    let c = uniform_matrix(rng, m2, n);
    let d = (0..m2).map(|_| 10f64.powf(4.0 * rng.random::<f64>() - 2.0)).collect();
    DenseInstance { h, a, c, d }
}

/// Rank counts and the null-space residual on random `(H, A)` pairs.
pub fn lemma_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for i in 0..LEMMA_INSTANCES {
        let mut rng = instance_rng(seed, i as u64);
        let n = rng.random_range(2..=LEMMA_MAX_N);
        let m1 = rng.random_range(1..=n);
        let inst = random_instance(&mut rng, n, m1, 0);
        let r = check_rank_lemmas(&inst.h, &inst.a, LEMMA_TOL)?;
        out.push(Check::new(
            format!("rank-lemmas[{i}] n={n} m1={m1}"),
            r.pass,
            format!(
                "rank(Hbar)={} <= {m1}; rank(H-Hbar)={} <= {}; nullspace residual {:.2e}",
                r.rank_hbar,
                r.rank_complement,
                n - m1,
                r.nullspace_residual
            ),
        ));
    }
    Ok(out)
}

/// Unit-eigenvalue multiplicities and cluster counts of `P^{-1} K_F` for the
/// exact `P_H = D + C H^{-1} C^T` and for `P_L = D`.
pub fn theorem_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (s, &(n, m1, m2)) in THEOREM_SHAPES.iter().enumerate() {
        for i in 0..THEOREM_INSTANCES {
            let mut rng = instance_rng(seed, 1_000 * (s as u64 + 1) + i as u64);
            let inst = random_instance(&mut rng, n, m1, m2);
            let kf = dense_kf(&inst.h, &inst.a, &inst.c, &inst.d)?;
            let tag = format!("({n},{m1},{m2})[{i}]");

            let ph = dense_ph_exact(&inst.h, &inst.c, &inst.d)?;
            let sp = preconditioned_spectrum(&kf, &ph, UNIT_TOL)?;
            let need = m2.saturating_sub(m1);
            let distinct = sp.spectrum.distinct();
            out.push(Check::new(
                format!("ph-spectrum {tag}"),
                sp.unit_count >= need && distinct <= m1 + 1,
                format!("unit {} >= {need}; clusters {distinct} <= {}", sp.unit_count, m1 + 1),
            ));

            let pl = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&inst.d));
            let sp = preconditioned_spectrum(&kf, &pl, UNIT_TOL)?;
            let dof = n - m1;
            let need = m2.saturating_sub(dof);
            let distinct = sp.spectrum.distinct();
            let min = sp.spectrum.min();
            out.push(Check::new(
                format!("pl-spectrum {tag}"),
                sp.unit_count >= need && distinct <= dof + 1 && min >= 1.0 - 1e-10,
                format!(
                    "unit {} >= {need}; clusters {distinct} <= {}; min eigenvalue {min:.12}",
                    sp.unit_count,
                    dof + 1
                ),
            ));
        }
    }
    Ok(out)
}

fn consistent_config(v: Variant, krylov_tol: f64) -> IpmConfig {
    IpmConfig { krylov_tol, consistent_iterates: true, ..IpmConfig::with_strategy(v) }
}

/// Model versus counters for every variant on `SyQP^8_4` and `SyQP^64_32`.
pub fn cost_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, m1) in [(8, 4), (64, 32)] {
        let p = gen_syqp(&SyQpSpec::new(n, m1, seed))?;
        for v in Variant::ALL {
            let cfg = IpmConfig { backend: Backend::SparseRegularized, ..consistent_config(v, 1e-10) };
            let r = solve_qp(&p, &cfg)?;
            let k = KernelCosts::for_config(&p, &cfg)?;
            let name = format!("costs {} {v}", p.name);
            match predict_variant(v, &k, r.n_ipm_iters, &r.per_iter_krylov) {
                Ok(pred) => {
                    let rec = reconcile(&pred, &r.ledger, cfg.backend);
                    let bad: Vec<String> =
                        rec.failures().iter().map(|f| format!("{}: {} vs {}", f.kernel, f.predicted, f.measured)).collect();
                    out.push(Check::new(
                        name,
                        r.status == IpmStatus::Optimal && rec.pass(),
                        format!("status {:?}; total {} vs {}; {}", r.status, pred.total, r.ledger.total_flops(), bad.join("; ")),
                    ));
                }
                Err(e) => out.push(Check::new(name, false, e.to_string())),
            }
        }
    }
    Ok(out)
}

/// Factorization event counts for one solve, as `(label, observed, expected)`.
pub fn factorization_counts(v: Variant, ledger: &CostLedger, n_ipm: usize) -> Vec<(&'static str, u64, u64)> {
    let n = n_ipm as u64;
    match v {
        Variant::DKc => vec![(LABEL_KC, ledger.factorizations(LABEL_KC), n)],
        Variant::CpKc => vec![(LABEL_PCP, ledger.factorizations(LABEL_PCP), n)],
        Variant::RgKc => vec![(LABEL_PRG, ledger.factorizations(LABEL_PRG), n)],
        Variant::PlKf | Variant::UKf => vec![(LABEL_F, ledger.factorizations(LABEL_F), 1)],
        Variant::PhKf => {
            vec![(LABEL_F, ledger.factorizations(LABEL_F), 1), (LABEL_PH, ledger.factorizations(LABEL_PH), n)]
        }
        Variant::UKc => vec![],
    }
}

/// Factorization counts over full solves of the `n = 64` synthetic grid.
pub fn factorize_once_checks(seed: u64) -> Result<Vec<Check>> {
    let variants = [Variant::DKc, Variant::CpKc, Variant::RgKc, Variant::PlKf, Variant::PhKf];
    let mut out = Vec::new();
    for m1 in SYQP64_GRID {
        let p = gen_syqp(&SyQpSpec::new(64, m1, seed))?;
        for v in variants {
            let r = solve_qp(&p, &consistent_config(v, 1e-10))?;
            let counts = factorization_counts(v, &r.ledger, r.n_ipm_iters);
            let pass = r.status == IpmStatus::Optimal && counts.iter().all(|(_, got, want)| got == want);
            let detail: Vec<String> = counts.iter().map(|(l, got, want)| format!("{l}: {got} (expected {want})")).collect();
            out.push(Check::new(
                format!("factorize-once {} {v}", p.name),
                pass,
                format!("status {:?}; N_I {}; {}", r.status, r.n_ipm_iters, detail.join(", ")),
            ));
        }
    }
    Ok(out)
}

/// Worst direction-recovery measures of one strategy over the iterates of a
/// direct solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryWorst {
    pub iterates: usize,
    pub augmented_relres: f64,
    pub complementarity: f64,
}

impl RecoveryWorst {
    pub fn pass(&self) -> bool {
        self.iterates > 0
            && self.augmented_relres <= RECOVERY_RELRES
            && self.complementarity <= RECOVERY_COMPLEMENTARITY
    }
}

/// Collects the iterates of a direct solve of `p` and, at each of them,
/// computes every strategy's own direction at `krylov_tol`, checking it
/// against the first augmented system and the complementarity row.
pub fn recovery_worst(p: &QpProblem, krylov_tol: f64) -> Result<Vec<(Variant, RecoveryWorst)>> {
    let mut iterates = Vec::new();
    let mut work = None;
    let r = solve_qp_observed(p, &IpmConfig::with_strategy(Variant::DKc), &mut |w, st| {
        work.get_or_insert_with(|| w.clone());
        iterates.push(st.clone());
    })?;
    if r.status != IpmStatus::Optimal {
        return Err(Error::NumericalBreakdown(format!("reference solve ended with {:?}", r.status)));
    }
    let work = work.unwrap_or_else(|| p.clone());
    let mut out = Vec::new();
    for v in Variant::ALL {
        let cfg = IpmConfig { krylov_tol, ..IpmConfig::with_strategy(v) };
        let mut ledger = CostLedger::new();
        let ctx = StrategyContext::setup(&work, &cfg, &mut ledger)?;
        let mut worst = RecoveryWorst { iterates: 0, augmented_relres: 0.0, complementarity: 0.0 };
        for st in &iterates {
            let step = newton_step(&work, st, &cfg, &ctx, &mut ledger)?;
            let c = check_direction(&work, st, &st.residuals, &step.direction);
            worst.iterates += 1;
            worst.augmented_relres = worst.augmented_relres.max(c.augmented_relres);
            worst.complementarity = worst.complementarity.max(c.complementarity);
        }
        out.push((v, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_tags_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.as_str().parse::<Suite>().unwrap(), s);
        }
        assert!("spectra".parse::<Suite>().is_err());
    }

    #[test]
    fn random_instances_are_reproducible_and_spd() {
        let a = random_instance(&mut instance_rng(5, 2), 6, 2, 4);
        let b = random_instance(&mut instance_rng(5, 2), 6, 2, 4);
        assert_eq!(a.h, b.h);
        assert_eq!(a.d, b.d);
        assert!(a.h.clone().cholesky().is_some());
        assert!(a.d.iter().all(|&x| (0.01..=100.0).contains(&x)));
        let c = random_instance(&mut instance_rng(5, 3), 6, 2, 4);
        assert_ne!(a.h, c.h);
    }

    #[test]
    fn failure_list_lists_only_failures() {
        let rep = VerifyReport {
            suite: "lemmas".into(),
            seed: 0,
            checks: vec![Check::new("a", true, ""), Check::new("b", false, "why")],
        };
        assert!(!rep.pass());
        let j = rep.failure_json();
        assert_eq!(j["total"], 2);
        assert_eq!(j["failures"][0]["name"], "b");
    }

    #[test]
    fn recovery_on_small_problem() {
        let p = gen_syqp(&SyQpSpec::new(8, 4, 1)).unwrap();
        for (v, w) in recovery_worst(&p, 1e-10).unwrap() {
            assert!(w.pass(), "{v}: {w:?}");
        }
    }
}
