//! Argument definitions and subcommand implementations for the `cdare` binary.

pub mod io;

use std::path::PathBuf;
use std::str::FromStr;

use cdare_core::analysis::{check_solvability, compute_diagnostics};
use cdare_core::bench::{
    gen_random_problem, gen_scalar_problem, run_problems, scalar_family, EnsembleSpec, TrialRecord,
};
use cdare_core::matcore::{hermitian_verdict, stein_solve_conjugate, UNIT_ROUNDOFF};
use cdare_core::model::{residuals, transform_to_dare_unchecked};
use cdare_core::solvers::solve;
use cdare_core::{CdareError, CdareProblem, Sign, SolveReport, SolverConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::io::{
    csv_string, emit, fmt_f64, fmt_opt_f64, read_json, read_solution, ProblemFile, SteinFile,
    VerifyFile,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Core(CdareError),
    Usage(String),
}

impl std::error::Error for CliError {}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(s) | CliError::Usage(s) => f.write_str(s),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<CdareError> for CliError {
    fn from(e: CdareError) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cdare",
    version,
    about = "Solvers for conjugate discrete-time algebraic Riccati equations"
)]
pub struct Cli {
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem read from JSON.
    Solve(SolveArgs),
    /// Compute residuals of a candidate solution.
    Verify(VerifyArgs),
    /// Iteration-count benchmarks.
    Bench(BenchArgs),
    /// Solve `X - A^H conj(X) A = Q`.
    Stein(SteinArgs),
    /// Solvability checks and closed-loop spectral diagnostics.
    Diag(SolveArgs),
}

/// `fp`, `sda` (same as `accel:2`) or `accel:<r>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodArg(pub u32);

impl FromStr for MethodArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "fp" => Ok(MethodArg(1)),
            "sda" => Ok(MethodArg(2)),
            _ => {
                let r = s.strip_prefix("accel:").ok_or_else(|| {
                    format!("unknown method `{s}` (expected fp, sda or accel:<r>)")
                })?;
                let r: u32 = r.parse().map_err(|_| format!("bad order in `{s}`"))?;
                if r < 2 {
                    return Err(format!("accelerated order must be at least 2, got {r}"));
                }
                Ok(MethodArg(r))
            }
        }
    }
}

impl MethodArg {
    pub fn label(self) -> String {
        if self.0 == 1 {
            "fp".to_string()
        } else {
            format!("r={}", self.0)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value = "sda")]
    pub method: MethodArg,
    /// Residual tolerance (default `n * u`).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig, CliError> {
        config_for(self.method, self.tol, self.max_iter)
    }
}

fn config_for(
    m: MethodArg,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::with_order(m.0);
    cfg.tol_res = tol;
    if let Some(k) = max_iter {
        cfg.max_iter = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Overrides the sign stored in the input file.
    #[arg(long)]
    pub sign: Option<Sign>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Keep every `H` iterate in the report.
    #[arg(long)]
    pub record_iterates: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// File holding `X` or a solve report with `x_pos`; otherwise `X` is read from the input.
    #[arg(long)]
    pub solution: Option<PathBuf>,
    #[arg(long)]
    pub sign: Option<Sign>,
    /// Tolerance for the Hermitian and definiteness verdicts.
    #[arg(long, default_value_t = 1e-12)]
    pub verdict_tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Run the scalar family instead of a random ensemble.
    #[arg(long)]
    pub scalar: bool,
    /// Ensemble specification as JSON; flags override its fields.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sign: Option<Sign>,
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values = ["fp", "accel:2", "accel:3", "accel:4", "accel:5"])]
    pub method: Vec<MethodArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Solve trials on the rayon pool.
    #[arg(long)]
    pub parallel: bool,
    /// Include wall-clock columns; output is then no longer reproducible byte for byte.
    #[arg(long)]
    pub timing: bool,
    /// Per-trial CSV output for ensemble runs.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteinArgs {
    #[arg(long)]
    pub input: PathBuf,
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    let out = cli.output.as_deref();
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, cli.format, out),
        Command::Verify(a) => cmd_verify(a, cli.format, out),
        Command::Bench(a) => cmd_bench(a, cli.format, out),
        Command::Stein(a) => cmd_stein(a, cli.format, out),
        Command::Diag(a) => cmd_diag(a, cli.format, out),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Data(format!("serialization failed: {e}")))
}

fn load_problem(path: &std::path::Path, sign: Option<Sign>) -> Result<CdareProblem, CliError> {
    let pf: ProblemFile = read_json(path)?;
    pf.into_problem(sign)
}

fn exit_for(report: &SolveReport) -> u8 {
    if report.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

pub fn cmd_solve(
    a: &SolveArgs,
    fmt: Format,
    out: Option<&std::path::Path>,
) -> Result<u8, CliError> {
    let p = load_problem(&a.input, a.sign)?;
    let mut cfg = a.solver.config()?;
    cfg.record_iterates = a.record_iterates;
    let report = solve(&p, &cfg)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let body = match fmt {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .trace
                .records
                .iter()
                .map(|r| {
                    vec![
                        r.k.to_string(),
                        r.index.to_string(),
                        fmt_f64(r.res),
                        fmt_f64(r.nres),
                        fmt_opt_f64(r.min_eig_h),
                        fmt_opt_f64(r.min_eig_g),
                    ]
                })
                .collect();
            csv_string(
                &["k", "index", "res", "nres", "min_eig_h", "min_eig_g"],
                &rows,
            )?
        }
    };
    emit(out, &body)?;
    Ok(exit_for(&report))
}

#[derive(Debug, Serialize)]
struct VerifyOutput {
    res: f64,
    nres: f64,
    tol: f64,
    accepted: bool,
    hermitian: bool,
    positive_definite: bool,
    min_eigenvalue: f64,
}

pub fn cmd_verify(
    a: &VerifyArgs,
    fmt: Format,
    out: Option<&std::path::Path>,
) -> Result<u8, CliError> {
    let vf: VerifyFile = read_json(&a.input)?;
    let x = match &a.solution {
        Some(path) => read_solution(path)?,
        None => {
            vf.x.clone()
                .ok_or_else(|| CliError::Data("missing field `X` (or pass --solution)".into()))?
        }
    };
    let p = vf.problem.into_problem(a.sign)?;
    if x.rows() != p.n() || x.cols() != p.n() {
        return Err(CliError::Data(format!(
            "field `X` is {}x{}, but `n` is {}",
            x.rows(),
            x.cols(),
            p.n()
        )));
    }
    let r = residuals(&p, &x)?;
    let tol = p.n() as f64 * UNIT_ROUNDOFF;
    let accepted = r.res <= tol * p.h().norm_fro().max(1.0) || r.nres <= tol;
    let hv = hermitian_verdict(&x, a.verdict_tol);
    let v = VerifyOutput {
        res: r.res,
        nres: r.nres,
        tol,
        accepted,
        hermitian: hv.is_hermitian,
        positive_definite: hv.is_positive_definite,
        min_eigenvalue: hv.min_eigenvalue,
    };
    let body = match fmt {
        Format::Json => to_json(&v)?,
        Format::Csv => csv_string(
            &[
                "res",
                "nres",
                "tol",
                "accepted",
                "hermitian",
                "positive_definite",
                "min_eigenvalue",
            ],
            &[vec![
                fmt_f64(v.res),
                fmt_f64(v.nres),
                fmt_f64(v.tol),
                v.accepted.to_string(),
                v.hermitian.to_string(),
                v.positive_definite.to_string(),
                fmt_f64(v.min_eigenvalue),
            ]],
        )?,
    };
    emit(out, &body)?;
    Ok(if accepted {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Serialize)]
struct ScalarCell {
    method: String,
    rho: f64,
    a: f64,
    iterations: Option<usize>,
    res: Option<f64>,
    error: Option<f64>,
    converged: bool,
    time_s: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EnsembleRow {
    method: String,
    trials: usize,
    min_it: usize,
    max_it: usize,
    ave_it: f64,
    the_it: f64,
    ave_time: Option<f64>,
    failures: usize,
}

fn bench_sign(a: &BenchArgs, default: Sign) -> Sign {
    a.sign.unwrap_or(default)
}

pub fn cmd_bench(
    a: &BenchArgs,
    fmt: Format,
    out: Option<&std::path::Path>,
) -> Result<u8, CliError> {
    if a.method.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    if a.scalar {
        bench_scalar(a, fmt, out)
    } else {
        bench_ensemble(a, fmt, out)
    }
}

fn bench_scalar(a: &BenchArgs, fmt: Format, out: Option<&std::path::Path>) -> Result<u8, CliError> {
    let sign = bench_sign(a, Sign::Plus);
    let mut cells = Vec::new();
    for &m in &a.method {
        let cfg = config_for(m, a.tol, a.max_iter)?;
        for (rho, _) in scalar_family() {
            let sp = gen_scalar_problem(rho, sign)?;
            let cell = match solve(&sp.problem, &cfg) {
                Ok(rep) => ScalarCell {
                    method: m.label(),
                    rho,
                    a: sp.a,
                    iterations: Some(rep.iterations),
                    res: Some(rep.residual.res),
                    error: Some(
                        (rep.x_pos.get(0, 0).re - sp.exact).abs() / sp.exact.abs().max(1.0),
                    ),
                    converged: rep.converged,
                    time_s: a.timing.then_some(rep.elapsed_s),
                },
                Err(e) => {
                    log::warn!("{} rho={rho}: {e}", m.label());
                    ScalarCell {
                        method: m.label(),
                        rho,
                        a: sp.a,
                        iterations: None,
                        res: None,
                        error: None,
                        converged: false,
                        time_s: None,
                    }
                }
            };
            cells.push(cell);
        }
    }
    let body = match fmt {
        Format::Json => to_json(&json!({ "sign": sign, "cells": cells }))?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = cells
                .iter()
                .map(|c| {
                    vec![
                        c.method.clone(),
                        fmt_f64(c.rho),
                        fmt_f64(c.a),
                        c.iterations.map(|k| k.to_string()).unwrap_or_default(),
                        fmt_opt_f64(c.res),
                        fmt_opt_f64(c.error),
                        c.converged.to_string(),
                        fmt_opt_f64(c.time_s),
                    ]
                })
                .collect();
            csv_string(
                &[
                    "method",
                    "rho",
                    "a",
                    "iterations",
                    "res",
                    "error",
                    "converged",
                    "time_s",
                ],
                &rows,
            )?
        }
    };
    emit(out, &body)?;
    Ok(EXIT_OK)
}

fn ensemble_spec(a: &BenchArgs) -> Result<EnsembleSpec, CliError> {
    let mut spec = match &a.input {
        Some(path) => read_json::<EnsembleSpec>(path)?,
        None => EnsembleSpec::new(10, 50, 0, Sign::Plus),
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(t) = a.trials {
        spec.trials = t;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.sign = bench_sign(a, spec.sign);
    spec.validate()?;
    Ok(spec)
}

fn bench_ensemble(
    a: &BenchArgs,
    fmt: Format,
    out: Option<&std::path::Path>,
) -> Result<u8, CliError> {
    let spec = ensemble_spec(a)?;
    let mut rows = Vec::new();
    let mut all_records: Vec<(String, TrialRecord)> = Vec::new();
    for &m in &a.method {
        let cfg = config_for(m, a.tol, a.max_iter)?;
        // Trials are seeded per index, so every method sees the same problems.
        let ps = (0..spec.trials)
            .map(|i| gen_random_problem(&spec, i))
            .collect();
        let outcome = run_problems(ps, &cfg, a.parallel);
        let s = outcome.stats;
        rows.push(EnsembleRow {
            method: m.label(),
            trials: s.trials,
            min_it: s.min_it,
            max_it: s.max_it,
            ave_it: s.ave_it,
            the_it: s.the_it,
            ave_time: a.timing.then_some(s.ave_time),
            failures: s.failures,
        });
        all_records.extend(outcome.records.into_iter().map(|r| (m.label(), r)));
    }
    if let Some(path) = &a.records {
        let recs: Vec<Vec<String>> = all_records
            .iter()
            .map(|(m, r)| {
                vec![
                    m.clone(),
                    r.trial.to_string(),
                    r.n.to_string(),
                    fmt_opt_f64(r.rho_t1),
                    r.iterations.to_string(),
                    r.predicted.map(|k| k.to_string()).unwrap_or_default(),
                    fmt_f64(r.res),
                    fmt_f64(r.nres),
                    if a.timing {
                        fmt_f64(r.time_s)
                    } else {
                        String::new()
                    },
                    r.converged.to_string(),
                ]
            })
            .collect();
        let text = csv_string(
            &[
                "method",
                "trial",
                "n",
                "rho_T1",
                "iterations",
                "predicted",
                "res",
                "nres",
                "time_s",
                "converged",
            ],
            &recs,
        )?;
        emit(Some(path), &text)?;
    }
    let body = match fmt {
        Format::Json => to_json(&json!({ "spec": spec, "rows": rows }))?,
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.method.clone(),
                        r.trials.to_string(),
                        r.min_it.to_string(),
                        r.max_it.to_string(),
                        fmt_f64(r.ave_it),
                        fmt_f64(r.the_it),
                        fmt_opt_f64(r.ave_time),
                        r.failures.to_string(),
                    ]
                })
                .collect();
            csv_string(
                &[
                    "method", "trials", "min_it", "max_it", "ave_it", "the_it", "ave_time",
                    "failures",
                ],
                &table,
            )?
        }
    };
    emit(out, &body)?;
    Ok(EXIT_OK)
}

pub fn cmd_stein(
    a: &SteinArgs,
    fmt: Format,
    out: Option<&std::path::Path>,
) -> Result<u8, CliError> {
    let sf: SteinFile = read_json(&a.input)?;
    let x = stein_solve_conjugate(&sf.a, &sf.q)?;
    let lhs =
        &x - &(cdare_core::matcore::conj_transpose(&sf.a) * cdare_core::matcore::conj(&x) * &sf.a);
    let residual = (&lhs - &sf.q).norm_fro() / x.norm_fro().max(f64::MIN_POSITIVE);
    let body = match fmt {
        Format::Json => to_json(&json!({ "X": x, "residual": residual }))?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = (0..x.rows())
                .flat_map(|i| {
                    let x = &x;
                    (0..x.cols()).map(move |j| {
                        let z = x.get(i, j);
                        vec![i.to_string(), j.to_string(), fmt_f64(z.re), fmt_f64(z.im)]
                    })
                })
                .collect();
            csv_string(&["row", "col", "re", "im"], &rows)?
        }
    };
    emit(out, &body)?;
    Ok(EXIT_OK)
}

pub fn cmd_diag(a: &SolveArgs, fmt: Format, out: Option<&std::path::Path>) -> Result<u8, CliError> {
    let p = load_problem(&a.input, a.sign)?;
    let solvability = check_solvability(&p);
    let cfg = a.solver.config()?;
    let report = solve(&p, &cfg)?;
    let diagnostics = match &report.diagnostics {
        Some(d) => Some(d.clone()),
        None if report.converged => {
            let t1 = transform_to_dare_unchecked(&p)?;
            Some(compute_diagnostics(&p, &t1, &report.x_pos, None)?)
        }
        None => None,
    };
    let body = match fmt {
        Format::Json => to_json(&json!({
            "solvability": solvability,
            "converged": report.converged,
            "iterations": report.iterations,
            "residual": report.residual,
            "diagnostics": diagnostics,
        }))?,
        Format::Csv => {
            let d = diagnostics.as_ref();
            csv_string(
                &[
                    "plus_ok",
                    "minus_ok",
                    "rho_conj_a_a",
                    "rho_t1",
                    "n1_predicted",
                    "converged",
                    "iterations",
                ],
                &[vec![
                    solvability.plus_ok.to_string(),
                    solvability.minus_ok.to_string(),
                    fmt_f64(solvability.rho_conj_a_a),
                    fmt_opt_f64(d.and_then(|d| d.rho_t1)),
                    d.and_then(|d| d.n1_predicted)
                        .map(|k| k.to_string())
                        .unwrap_or_default(),
                    report.converged.to_string(),
                    report.iterations.to_string(),
                ]],
            )?
        }
    };
    emit(out, &body)?;
    Ok(exit_for(&report))
}
