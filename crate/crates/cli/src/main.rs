//! `sfipm` command-line front end: single solves, the benchmark grid and the
//! verification suites.
//!
//! Exit codes: 0 success, 1 solve or suite failure, 2 usage error or
//! unreadable input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use sfipm::bench::{run_bench, BenchConfig, ProblemSet, DEFAULT_M1_GRID};
use sfipm::ipm::{solve_qp, IpmConfig, IpmStatus, Variant};
use sfipm::precond::PhMode;
use sfipm::problems::{gen_syqp, read_qps_file, SyQpSpec};
use sfipm::verify::{run_suite, Suite};

const DEFAULT_OUT_DIR: &str = "sfipm-out";

#[derive(Parser, Debug)]
#[command(name = "sfipm", version, about = "Single-factorization interior point QP solver")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "SFIPM_OUT_DIR", default_value = DEFAULT_OUT_DIR)]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem with one strategy and write a JSON report.
    Solve(SolveArgs),
    /// Run the variant x problem grid and write CSV tables.
    Bench(BenchArgs),
    /// Run a property suite: lemmas, theorems, costs or factorize-once.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct SolverOpts {
    #[arg(long, default_value_t = 1e-3)]
    krylov_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    ipm_tol: f64,
    /// Advance the iterates with the direct direction (benchmark protocol).
    #[arg(long)]
    consistent: bool,
    /// `diag-h` or `exact-h`.
    #[arg(long, default_value = "diag-h", value_parser = parse_ph_mode)]
    ph_mode: PhMode,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Synthetic problem, e.g. `n=8,m1=4,seed=1`.
    #[arg(long, value_parser = parse_syqp, conflicts_with = "qps", required_unless_present = "qps")]
    syqp: Option<SyQpSpec>,
    #[arg(long)]
    qps: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant)]
    variant: Variant,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Size of the synthetic grid.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Comma-separated equality counts; defaults to the nine-point grid.
    #[arg(long, value_delimiter = ',')]
    m1: Vec<usize>,
    /// QPS files to run instead of the synthetic grid.
    #[arg(long, num_args = 1..)]
    qps: Vec<PathBuf>,
    /// Comma-separated strategy tags.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "d-kc,u-kc,cp-kc,rg-kc,u-kf,pl-kf,ph-kf")]
    variants: Vec<Variant>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    opts: SolverOpts,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.trim().parse().map_err(|e: sfipm::Error| e.to_string())
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: sfipm::Error| e.to_string())
}

fn parse_ph_mode(s: &str) -> Result<PhMode, String> {
    match s {
        "diag-h" => Ok(PhMode::DiagH),
        "exact-h" => Ok(PhMode::ExactH),
        _ => Err(format!("unknown P_H mode '{s}' (expected diag-h or exact-h)")),
    }
}

fn parse_syqp(s: &str) -> Result<SyQpSpec, String> {
    let (mut n, mut m1, mut seed) = (None, None, 1u64);
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got '{part}'"))?;
        let num = |v: &str| v.trim().parse::<u64>().map_err(|_| format!("'{v}' is not a non-negative integer"));
        match k.trim() {
            "n" => n = Some(num(v)? as usize),
            "m1" => m1 = Some(num(v)? as usize),
            "seed" => seed = num(v)?,
            other => return Err(format!("unknown key '{other}' (expected n, m1, seed)")),
        }
    }
    let n = n.ok_or("missing n")?;
    let m1 = m1.ok_or("missing m1")?;
    Ok(SyQpSpec::new(n, m1, seed))
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage(err: anyhow::Error) -> Failure {
    Failure { code: 2, err }
}

fn failed(err: anyhow::Error) -> Failure {
    Failure { code: 1, err }
}

fn ipm_config(v: Variant, o: &SolverOpts) -> IpmConfig {
    IpmConfig {
        krylov_tol: o.krylov_tol,
        ipm_tol: o.ipm_tol,
        consistent_iterates: o.consistent,
        ph_mode: o.ph_mode,
        ..IpmConfig::with_strategy(v)
    }
}

fn check_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(anyhow!("file not found: {}", path.display())))
    }
}

fn write_out(dir: &Path, name: &str, body: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(failed)?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display())).map_err(failed)?;
    Ok(path)
}

fn cmd_solve(args: &SolveArgs, out_dir: &Path) -> Result<ExitCode, Failure> {
    let problem = match (&args.syqp, &args.qps) {
        (Some(spec), _) => gen_syqp(spec).map_err(|e| usage(e.into()))?,
        (None, Some(path)) => {
            check_file(path)?;
            read_qps_file(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?
        }
        (None, None) => return Err(usage(anyhow!("one of --syqp or --qps is required"))),
    };
    let cfg = ipm_config(args.variant, &args.opts);
    let r = solve_qp(&problem, &cfg).map_err(|e| failed(e.into()))?;
    let report = serde_json::json!({
        "problem": problem.name,
        "variant": args.variant,
        "status": r.status,
        "objective": r.objective + problem.obj_const,
        "n_ipm": r.n_ipm_iters,
        "per_iter_krylov": r.per_iter_krylov,
        "ledger": r.ledger,
        "diagnostics": r.diagnostics,
    });
    let body = serde_json::to_string_pretty(&report).map_err(|e| failed(e.into()))?;
    write_out(out_dir, &format!("solve-{}-{}.json", problem.name, args.variant), &body)?;
    println!("{body}");
    if r.status == IpmStatus::Optimal {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(failed(anyhow!("solve ended with status {:?}", r.status)))
    }
}

fn cmd_bench(args: &BenchArgs, out_dir: &Path) -> Result<ExitCode, Failure> {
    if args.variants.is_empty() {
        return Err(usage(anyhow!("the variant list is empty")));
    }
    let problems = if args.qps.is_empty() {
        let m1 = if args.m1.is_empty() { DEFAULT_M1_GRID.to_vec() } else { args.m1.clone() };
        ProblemSet::SyQpGrid { n: args.n, m1 }
    } else {
        for f in &args.qps {
            check_file(f)?;
        }
        ProblemSet::Qps(args.qps.clone())
    };
    let cfg = BenchConfig {
        krylov_tol: args.opts.krylov_tol,
        ipm_tol: args.opts.ipm_tol,
        consistent_iterates: args.opts.consistent,
        ph_mode: args.opts.ph_mode,
        seed: args.seed,
        ..BenchConfig::new(problems, args.variants.clone(), out_dir)
    };
    cfg.validate().map_err(|e| usage(e.into()))?;
    let report = run_bench(&cfg).map_err(|e| failed(e.into()))?;
    let files = report.write(out_dir).map_err(|e| failed(e.into()))?;
    print!("{}", report.bench_csv());
    print!("{}", report.summary_csv());
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: &VerifyArgs, out_dir: &Path) -> Result<ExitCode, Failure> {
    let report = run_suite(args.suite, args.seed).map_err(|e| failed(e.into()))?;
    let body = serde_json::to_string_pretty(&report.failure_json()).map_err(|e| failed(e.into()))?;
    write_out(out_dir, &format!("verify-{}.json", args.suite), &body)?;
    println!("{body}");
    if report.pass() {
        Ok(ExitCode::SUCCESS)
    } else {
        Err(failed(anyhow!("{} of {} checks failed", report.failures().len(), report.checks.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, &cli.out_dir),
        Command::Bench(a) => cmd_bench(a, &cli.out_dir),
        Command::Verify(a) => cmd_verify(a, &cli.out_dir),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syqp_spec_parsing() {
        let s = parse_syqp("n=8,m1=4,seed=3").unwrap();
        assert_eq!((s.n, s.m1, s.seed), (8, 4, 3));
        assert_eq!(parse_syqp("m1=2,n=4").unwrap().seed, 1);
        assert!(parse_syqp("n=8").is_err());
        assert!(parse_syqp("n=8,m1=x").is_err());
        assert!(parse_syqp("n=8,m1=2,k=1").is_err());
    }

    #[test]
    fn command_line_shape() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
