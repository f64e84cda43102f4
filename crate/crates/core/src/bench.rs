//! Experiment generators and ensemble statistics.
//!
//! Random problems follow a fixed recipe: positive diagonals conjugated by a
//! Haar-like unitary for `G` and `H`, and a complex Gaussian `A` rescaled so
//! that `rho(conj(A) A)` equals a uniform draw in `(0, 1)`. Every trial owns
//! its own ChaCha stream keyed by `(seed, trial_index)`, so results do not
//! depend on execution order.

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CdareError, Result};
use crate::matcore::{conj, conj_transpose, spectral_radius, symmetrize, CMatrix};
use crate::model::{transform_to_dare, CdareProblem, Sign};
use crate::solvers::{solve, SolverConfig};

pub const DEFAULT_DIAG_SCALE: f64 = 1e2;
pub const DEFAULT_MAX_RETRIES: usize = 1000;

/// `(rho, |a|)` pairs of the tabulated scalar family.
pub fn scalar_family() -> [(f64, f64); 4] {
    [
        (0.5, 0.5f64.sqrt()),
        (0.5f64.sqrt(), 0.75f64.sqrt()),
        (0.75f64.sqrt(), 0.9999f64.sqrt()),
        (0.9999f64.sqrt(), 0.99999f64.sqrt()),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub sign: Sign,
    #[serde(default = "default_diag_scale")]
    pub diag_scale: f64,
    /// When set, every trial is the scalar problem with this `rho` label.
    #[serde(default)]
    pub target_rho: Option<f64>,
    #[serde(default = "default_max_retries")]
    pub max_retries: usize,
}

fn default_diag_scale() -> f64 {
    DEFAULT_DIAG_SCALE
}

fn default_max_retries() -> usize {
    DEFAULT_MAX_RETRIES
}

impl EnsembleSpec {
    pub fn new(n: usize, trials: usize, seed: u64, sign: Sign) -> Self {
        EnsembleSpec {
            n,
            trials,
            seed,
            sign,
            diag_scale: DEFAULT_DIAG_SCALE,
            target_rho: None,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(CdareError::InvalidConfig("n must be >= 1".into()));
        }
        if self.trials < 1 {
            return Err(CdareError::InvalidConfig("trials must be >= 1".into()));
        }
        if self.diag_scale.is_nan() || self.diag_scale <= 0.0 {
            return Err(CdareError::InvalidConfig(
                "diag_scale must be positive".into(),
            ));
        }
        if self.max_retries < 1 {
            return Err(CdareError::InvalidConfig("max_retries must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: usize,
    pub min_it: usize,
    pub max_it: usize,
    pub ave_it: f64,
    pub the_it: f64,
    pub ave_time: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    pub rho_t1: Option<f64>,
    pub iterations: usize,
    pub predicted: Option<u64>,
    pub res: f64,
    pub nres: f64,
    pub time_s: f64,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleOutcome {
    pub stats: TrialStats,
    pub records: Vec<TrialRecord>,
}

fn complex_gaussian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    })
}

/// Unitary factor of a QR decomposition with the diagonal of `R` made
/// real positive.
fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let z = complex_gaussian(n, rng);
    let qr = z.into_inner().qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    CMatrix::wrap(q)
}

fn draw_problem(spec: &EnsembleSpec, rng: &mut ChaCha8Rng) -> Result<CdareProblem> {
    let n = spec.n;
    let diag = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = Open01.sample(rng);
                u * spec.diag_scale
            })
            .collect()
    };
    let g_hat = CMatrix::from_real_diagonal(&diag(rng));
    let h_hat = CMatrix::from_real_diagonal(&diag(rng));
    let q = random_unitary(n, rng);
    let qh = conj_transpose(&q);
    let g = symmetrize(&(&qh * g_hat * &q));
    let h = symmetrize(&(&qh * h_hat * &q));

    let a_hat = complex_gaussian(n, rng);
    let a_draw: f64 = Open01.sample(rng);
    let temp = spectral_radius(&(conj(&a_hat) * &a_hat))?;
    let a = a_hat.scale(a_draw.sqrt() / temp.sqrt());
    CdareProblem::new(a, g, h, spec.sign)
}

fn trial_rng(seed: u64, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index as u64);
    rng
}

/// Deterministic random problem for `(spec.seed, trial_index)`.
///
/// Minus-sign problems are redrawn until `G_1 > 0` and `H_1 > 0`, at most
/// `spec.max_retries` times.
pub fn gen_random_problem(spec: &EnsembleSpec, trial_index: usize) -> Result<CdareProblem> {
    spec.validate()?;
    if let Some(rho) = spec.target_rho {
        return gen_scalar_problem(rho, spec.sign).map(|s| s.problem);
    }
    let mut rng = trial_rng(spec.seed, trial_index);
    match spec.sign {
        Sign::Plus => draw_problem(spec, &mut rng),
        Sign::Minus => {
            for _ in 0..spec.max_retries {
                let p = draw_problem(spec, &mut rng)?;
                if transform_to_dare(&p).is_ok() {
                    return Ok(p);
                }
            }
            Err(CdareError::RetryExhausted {
                attempts: spec.max_retries,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProblem {
    pub problem: CdareProblem,
    /// Exact positive solution.
    pub exact: f64,
    /// Modulus of the coefficient `a`.
    pub a: f64,
    pub rho: f64,
}

/// Scalar problem `x = h ± |a|^2 x / (1 + x)` with `g = 1`, built so that
/// `x = |a| / rho - 1` is its exact solution.
///
/// The four tabulated `rho` values use their paired `|a|` from
/// [`scalar_family`]; any other `rho` uses `|a| = sqrt(rho)`.
pub fn gen_scalar_problem(rho: f64, sign: Sign) -> Result<ScalarProblem> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CdareError::OutOfRange(format!(
            "rho = {rho} is outside (0, 1)"
        )));
    }
    let a = scalar_family()
        .iter()
        .find(|(r, _)| (r - rho).abs() <= 1e-12)
        .map_or(rho.sqrt(), |&(_, a)| a);
    gen_scalar_problem_with(a, rho, sign)
}

/// As [`gen_scalar_problem`] with an explicit `|a|` in `(rho, 1)`.
pub fn gen_scalar_problem_with(a: f64, rho: f64, sign: Sign) -> Result<ScalarProblem> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(CdareError::OutOfRange(format!(
            "rho = {rho} is outside (0, 1)"
        )));
    }
    if !(a > rho && a < 1.0) {
        return Err(CdareError::OutOfRange(format!(
            "|a| = {a} must lie in (rho, 1) = ({rho}, 1)"
        )));
    }
    let x = a / rho - 1.0;
    let h = x - sign.factor() * a * a * x / (1.0 + x);
    let problem = CdareProblem::new(
        CMatrix::real_scalar(a),
        CMatrix::real_scalar(1.0),
        CMatrix::real_scalar(h),
        sign,
    )?;
    Ok(ScalarProblem {
        problem,
        exact: x,
        a,
        rho,
    })
}

/// Generates and solves every trial of `spec`, returning aggregate stats.
pub fn run_ensemble(spec: &EnsembleSpec, cfg: &SolverConfig) -> Result<TrialStats> {
    run_ensemble_detailed(spec, cfg, false).map(|o| o.stats)
}

pub fn run_ensemble_detailed(
    spec: &EnsembleSpec,
    cfg: &SolverConfig,
    parallel: bool,
) -> Result<EnsembleOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let problems: Vec<Result<CdareProblem>> = (0..spec.trials)
        .map(|i| gen_random_problem(spec, i))
        .collect();
    Ok(run_problems(problems, cfg, parallel))
}

/// Solves a prepared list of problems; generation errors count as failures.
pub fn run_problems(
    problems: Vec<Result<CdareProblem>>,
    cfg: &SolverConfig,
    parallel: bool,
) -> EnsembleOutcome {
    let run = |(trial, p): (usize, Result<CdareProblem>)| run_trial(trial, p, cfg);
    let records: Vec<TrialRecord> = if parallel {
        problems.into_par_iter().enumerate().map(run).collect()
    } else {
        problems.into_iter().enumerate().map(run).collect()
    };
    let stats = aggregate(&records);
    EnsembleOutcome { stats, records }
}

fn run_trial(trial: usize, p: Result<CdareProblem>, cfg: &SolverConfig) -> TrialRecord {
    let failed = |n: usize, e: CdareError| TrialRecord {
        trial,
        n,
        rho_t1: None,
        iterations: 0,
        predicted: None,
        res: f64::INFINITY,
        nres: f64::INFINITY,
        time_s: 0.0,
        converged: false,
        error: Some(e.to_string()),
    };
    let p = match p {
        Ok(p) => p,
        Err(e) => return failed(0, e),
    };
    let start = Instant::now();
    let report = match solve(&p, cfg) {
        Ok(r) => r,
        Err(e) => return failed(p.n(), e),
    };
    let time_s = start.elapsed().as_secs_f64();
    let rho_t1 = report.diagnostics.as_ref().and_then(|d| d.rho_t1);
    let predicted = report.diagnostics.as_ref().and_then(|d| {
        if d.rho_t1 == Some(0.0) {
            return Some(1);
        }
        if cfg.order_r == 1 {
            d.n1_predicted
        } else {
            d.nr_predicted.get(&cfg.order_r).copied().or_else(|| {
                let rho = d.rho_t1?;
                crate::analysis::predict_iterations(rho, p.n(), &[cfg.order_r])
                    .ok()
                    .map(|pr| pr.nr[&cfg.order_r])
            })
        }
    });
    TrialRecord {
        trial,
        n: p.n(),
        rho_t1,
        iterations: report.iterations,
        predicted,
        res: report.residual.res,
        nres: report.residual.nres,
        time_s,
        converged: report.converged,
        error: None,
    }
}

fn aggregate(records: &[TrialRecord]) -> TrialStats {
    let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.converged).collect();
    let failures = records.len() - ok.len();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let its: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
    let preds: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.predicted.map(|p| p as f64))
        .collect();
    let times: Vec<f64> = ok.iter().map(|r| r.time_s).collect();
    TrialStats {
        trials: records.len(),
        min_it: ok.iter().map(|r| r.iterations).min().unwrap_or(0),
        max_it: ok.iter().map(|r| r.iterations).max().unwrap_or(0),
        ave_it: mean(&its),
        the_it: mean(&preds),
        ave_time: mean(&times),
        failures,
    }
}
