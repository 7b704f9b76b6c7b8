//! Variant x problem benchmark grid.
//!
//! Output files (all CSV, deterministic for a fixed configuration):
//!
//! * `bench.csv`: one row per (problem, variant) cell with `N_I`, Krylov
//!   count quartiles, predicted and measured flops and the objective gap
//!   against the direct strategy.
//! * `cg_distribution.csv`: `problem,variant,ipm_iter,n_kr`, one row per
//!   IPM iteration of every iterative cell.
//! * `summary.csv`: per-problem cost reduction of the best reduced-system
//!   strategy relative to the best augmented-system Krylov strategy and
//!   their geometric mean.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costmodel::{predict_variant, KernelCosts};
use crate::error::{Error, Result};
use crate::ipm::{solve_qp, IpmConfig, IpmResult, IpmStatus, QpProblem, Variant};
use crate::precond::PhMode;
use crate::problems::{gen_syqp, read_qps_file, SyQpSpec};

/// Label attached to the relative-cost summary.
pub const SUMMARY_LABEL: &str = "desk-scale; not comparable to a full benchmark";

/// The `m1` values of the default `n = 64` grid.
pub const DEFAULT_M1_GRID: [usize; 9] = [1, 8, 16, 24, 32, 40, 48, 56, 64];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProblemSet {
    SyQpGrid { n: usize, m1: Vec<usize> },
    Qps(Vec<PathBuf>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub problems: ProblemSet,
    pub variants: Vec<Variant>,
    pub krylov_tol: f64,
    pub ipm_tol: f64,
    pub consistent_iterates: bool,
    pub ph_mode: PhMode,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl BenchConfig {
    pub fn new(problems: ProblemSet, variants: Vec<Variant>, out_dir: impl Into<PathBuf>) -> Self {
        let base = IpmConfig::default();
        Self {
            problems,
            variants,
            krylov_tol: base.krylov_tol,
            ipm_tol: base.ipm_tol,
            consistent_iterates: true,
            ph_mode: base.ph_mode,
            seed: 1,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::InvalidProblem("the variant list is empty".into()));
        }
        let empty = match &self.problems {
            ProblemSet::SyQpGrid { m1, .. } => m1.is_empty(),
            ProblemSet::Qps(files) => files.is_empty(),
        };
        if empty {
            return Err(Error::InvalidProblem("the problem set is empty".into()));
        }
        Ok(())
    }

    pub fn ipm_config(&self, v: Variant) -> IpmConfig {
        IpmConfig {
            krylov_tol: self.krylov_tol,
            ipm_tol: self.ipm_tol,
            consistent_iterates: self.consistent_iterates,
            ph_mode: self.ph_mode,
            ..IpmConfig::with_strategy(v)
        }
    }

    pub fn load_problems(&self) -> Result<Vec<QpProblem>> {
        match &self.problems {
            ProblemSet::SyQpGrid { n, m1 } => m1.iter().map(|&m| gen_syqp(&SyQpSpec::new(*n, m, self.seed))).collect(),
            ProblemSet::Qps(files) => files.iter().map(|f| read_qps_file(f)).collect(),
        }
    }
}

/// Five-number summary of Krylov counts per IPM iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quartiles {
    pub fn of(counts: &[usize]) -> Option<Self> {
        if counts.is_empty() {
            return None;
        }
        let mut s: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        s.sort_by(f64::total_cmp);
        Some(Self {
            min: s[0],
            q1: quantile(&s, 0.25),
            median: quantile(&s, 0.5),
            q3: quantile(&s, 0.75),
            max: s[s.len() - 1],
        })
    }
}

/// One benchmark cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub problem: String,
    pub variant: Variant,
    pub status: Option<IpmStatus>,
    pub n_ipm: usize,
    pub n_kr: Option<Quartiles>,
    pub predicted_cost: u64,
    pub measured_cost: u64,
    pub cost_deviation: f64,
    pub objective: f64,
    pub objective_gap: f64,
    pub per_iter_krylov: Vec<usize>,
    pub error: Option<String>,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "problem,variant,status,n_ipm,n_kr_min,n_kr_q1,n_kr_median,n_kr_q3,n_kr_max,\
predicted_cost,measured_cost,cost_deviation,objective,objective_gap,error";

    pub fn optimal(&self) -> bool {
        self.status == Some(IpmStatus::Optimal)
    }

    fn csv(&self) -> String {
        let status = match self.status {
            Some(IpmStatus::Optimal) => "optimal",
            Some(IpmStatus::MaxIters) => "max-iters",
            Some(IpmStatus::LinearSolveFailure) => "linear-solve-failure",
            None => "error",
        };
        let q = self.n_kr.map_or_else(
            || ",,,,".to_string(),
            |q| format!("{},{},{},{},{}", q.min, q.q1, q.median, q.q3, q.max),
        );
        let err = self.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        format!(
            "{},{},{status},{},{q},{},{},{:e},{:e},{:e},{err}",
            self.problem,
            self.variant,
            self.n_ipm,
            self.predicted_cost,
            self.measured_cost,
            self.cost_deviation,
            self.objective,
            self.objective_gap
        )
    }
}

/// Geometric-mean summary of the relative cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub label: String,
    /// `(problem, best augmented-Krylov flops / best reduced-system flops)`.
    pub ratios: Vec<(String, f64)>,
    pub geometric_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: CostSummary,
}

fn run_cell(p: &QpProblem, v: Variant, cfg: &BenchConfig, reference: Option<f64>) -> BenchRow {
    let icfg = cfg.ipm_config(v);
    let mut row = BenchRow {
        problem: p.name.clone(),
        variant: v,
        status: None,
        n_ipm: 0,
        n_kr: None,
        predicted_cost: 0,
        measured_cost: 0,
        cost_deviation: f64::NAN,
        objective: f64::NAN,
        objective_gap: f64::NAN,
        per_iter_krylov: Vec::new(),
        error: None,
    };
    let r: IpmResult = match solve_qp(p, &icfg) {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.status = Some(r.status);
    row.n_ipm = r.n_ipm_iters;
    row.n_kr = Quartiles::of(&r.per_iter_krylov);
    row.measured_cost = r.ledger.total_flops();
    row.objective = r.objective;
    row.objective_gap = reference.map_or(f64::NAN, |o| (r.objective - o).abs() / o.abs().max(1.0));
    row.error = r.diagnostics.clone();
    match KernelCosts::for_config(p, &icfg).and_then(|k| predict_variant(v, &k, r.n_ipm_iters, &r.per_iter_krylov)) {
        Ok(pred) => {
            row.predicted_cost = pred.total;
            row.cost_deviation = (row.measured_cost as f64 - pred.total as f64) / (pred.total as f64).max(1.0);
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row.per_iter_krylov = r.per_iter_krylov;
    row
}

fn best(rows: &[&BenchRow], set: &[Variant]) -> Option<u64> {
    rows.iter().filter(|r| set.contains(&r.variant) && r.optimal()).map(|r| r.measured_cost).min()
}

/// Cost reduction of `{PL-KF, PH-KF}` relative to `{CP-KC, RG-KC}` per
/// problem: the cheaper baseline's flops over the cheaper reduced-system
/// strategy's flops, so values above one favour the reduced system.
/// Problems on which the direct strategy is cheapest of all optimal cells
/// are left out when a direct row is present.
pub fn cost_summary(rows: &[BenchRow]) -> CostSummary {
    let mut problems: Vec<&str> = rows.iter().map(|r| r.problem.as_str()).collect();
    problems.dedup();
    let mut ratios = Vec::new();
    for prob in problems {
        let cells: Vec<&BenchRow> = rows.iter().filter(|r| r.problem == prob).collect();
        let direct = best(&cells, &[Variant::DKc]);
        let cheapest = best(&cells, &Variant::ALL);
        if direct.is_some() && direct == cheapest {
            continue;
        }
        if let (Some(ours), Some(base)) =
            (best(&cells, &[Variant::PlKf, Variant::PhKf]), best(&cells, &[Variant::CpKc, Variant::RgKc]))
        {
            ratios.push((prob.to_string(), base as f64 / ours as f64));
        }
    }
    let geometric_mean = (!ratios.is_empty())
        .then(|| (ratios.iter().map(|(_, r)| r.ln()).sum::<f64>() / ratios.len() as f64).exp());
    CostSummary { label: SUMMARY_LABEL.to_string(), ratios, geometric_mean }
}

/// Runs every cell. The direct strategy always runs first on each problem to
/// provide the objective reference; it only appears in the rows when listed.
/// Cell failures are recorded as rows.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let problems = cfg.load_problems()?;
    let per_problem: Vec<Vec<BenchRow>> = problems
        .par_iter()
        .map(|p| {
            let reference = run_cell(p, Variant::DKc, cfg, None);
            let ref_obj = reference.optimal().then_some(reference.objective);
            cfg.variants
                .iter()
                .map(|&v| run_cell(p, v, cfg, ref_obj))
                .collect()
        })
        .collect();
    let rows: Vec<BenchRow> = per_problem.into_iter().flatten().collect();
    let summary = cost_summary(&rows);
    Ok(BenchReport { rows, summary })
}

impl BenchReport {
    pub fn bench_csv(&self) -> String {
        let mut s = format!("{}\n", BenchRow::CSV_HEADER);
        for r in &self.rows {
            writeln!(s, "{}", r.csv()).unwrap();
        }
        s
    }

    pub fn cg_distribution_csv(&self) -> String {
        let mut s = String::from("problem,variant,ipm_iter,n_kr\n");
        for r in self.rows.iter().filter(|r| r.variant.is_iterative()) {
            for (k, n) in r.per_iter_krylov.iter().enumerate() {
                writeln!(s, "{},{},{k},{n}", r.problem, r.variant).unwrap();
            }
        }
        s
    }

    pub fn summary_csv(&self) -> String {
        let mut s = format!("# {}\nproblem,cost_reduction\n", self.summary.label);
        for (p, r) in &self.summary.ratios {
            writeln!(s, "{p},{r:e}").unwrap();
        }
        match self.summary.geometric_mean {
            Some(g) => writeln!(s, "geometric_mean,{g:e}").unwrap(),
            None => writeln!(s, "geometric_mean,").unwrap(),
        }
        s
    }

    /// Writes the three CSV files into `dir` and returns their paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let files = [
            ("bench.csv", self.bench_csv()),
            ("cg_distribution.csv", self.cg_distribution_csv()),
            ("summary.csv", self.summary_csv()),
        ];
        let mut out = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body)?;
            out.push(path);
        }
        Ok(out)
    }

    pub fn row(&self, problem: &str, v: Variant) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.problem == problem && r.variant == v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_by_hand() {
        let q = Quartiles::of(&[4, 1, 3, 2]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        assert_eq!(Quartiles::of(&[7]).unwrap().median, 7.0);
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn empty_inputs_rejected() {
        let cfg = BenchConfig::new(ProblemSet::SyQpGrid { n: 8, m1: vec![4] }, vec![], "unused");
        assert!(cfg.validate().is_err());
        let cfg = BenchConfig::new(ProblemSet::SyQpGrid { n: 8, m1: vec![] }, vec![Variant::PlKf], "unused");
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_grid_rows_and_summary() {
        let cfg = BenchConfig {
            krylov_tol: 1e-10,
            ..BenchConfig::new(ProblemSet::SyQpGrid { n: 8, m1: vec![2, 4] }, Variant::ALL.to_vec(), "unused")
        };
        let rep = run_bench(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 14);
        for r in &rep.rows {
            assert!(r.optimal(), "{} {}: {:?}", r.problem, r.variant, r.error);
            assert_eq!(r.predicted_cost, r.measured_cost, "{} {}", r.problem, r.variant);
            assert!(r.objective_gap <= 1e-6);
        }
        assert!(rep.summary.ratios.iter().all(|(_, r)| *r > 0.0));
        assert_eq!(rep.summary.geometric_mean.is_some(), !rep.summary.ratios.is_empty());
        assert_eq!(rep.bench_csv(), run_bench(&cfg).unwrap().bench_csv());
        assert!(rep.summary_csv().starts_with(&format!("# {SUMMARY_LABEL}")));
    }

    fn row(problem: &str, v: Variant, cost: u64) -> BenchRow {
        BenchRow {
            problem: problem.into(),
            variant: v,
            status: Some(IpmStatus::Optimal),
            n_ipm: 1,
            n_kr: None,
            predicted_cost: cost,
            measured_cost: cost,
            cost_deviation: 0.0,
            objective: 0.0,
            objective_gap: 0.0,
            per_iter_krylov: vec![],
            error: None,
        }
    }

    #[test]
    fn summary_by_hand() {
        let rows = vec![
            row("p", Variant::CpKc, 300),
            row("p", Variant::RgKc, 200),
            row("p", Variant::PlKf, 100),
            row("p", Variant::PhKf, 400),
            row("q", Variant::CpKc, 100),
            row("q", Variant::PlKf, 400),
            row("r", Variant::DKc, 10),
            row("r", Variant::CpKc, 100),
            row("r", Variant::PlKf, 50),
        ];
        let s = cost_summary(&rows);
        assert_eq!(s.ratios, vec![("p".to_string(), 2.0), ("q".to_string(), 0.25)]);
        assert!((s.geometric_mean.unwrap() - (0.5f64).sqrt()).abs() < 1e-15);
    }
}
