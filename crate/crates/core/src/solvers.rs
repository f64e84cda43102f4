//! Iterative solvers: the plain fixed point `X_{k+1} = F(X_k)`, the
//! semigroup recursion on `(A_k, G_k, H_k)` and the order-`r` accelerated
//! scheme built on top of it.
//!
//! The accelerated scheme keeps a "hat" triple equal to `t_{r^k}` and forms
//! the next one by composing it with itself `r - 1` times, so each outer step
//! multiplies the semigroup index by `r`. `H_k` converges to the positive
//! definite solution and, when `A` is nonsingular, `-G_k^{-1}` to the
//! negative definite one.

use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, SpectralDiagnostics};
use crate::error::{CdareError, Result};
use crate::matcore::{
    conj_transpose, hermitian_eigenvalues, hermitian_verdict, inverse, numerical_rank,
    solve_linear_cond, symmetrize, CMatrix, DEFAULT_VERDICT_TOL, UNIT_ROUNDOFF,
};
use crate::model::{
    apply_f, residuals, transform_to_dare, transform_to_dare_unchecked, CdareProblem, DareTriple,
    ResidualPair, Sign,
};

/// Consecutive stalled steps before a run is declared stagnated.
const STAGNATION_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// 1 selects the plain fixed point; `r >= 2` the accelerated scheme.
    pub order_r: u32,
    /// Residual threshold; `None` means `n * u`.
    pub tol_res: Option<f64>,
    /// Relative step size below which a step counts as stalled.
    pub tol_stagnation: f64,
    pub max_iter: usize,
    /// Also accept `NRes <= tol`.
    pub use_nres: bool,
    /// Check definiteness of the running iterates and record their minimum
    /// eigenvalues in the trace.
    pub check_wellposed_each_step: bool,
    /// Keep every `H` iterate in the trace.
    pub record_iterates: bool,
    pub verdict_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            order_r: 2,
            tol_res: None,
            tol_stagnation: UNIT_ROUNDOFF,
            max_iter: 10_000,
            use_nres: true,
            check_wellposed_each_step: true,
            record_iterates: false,
            verdict_tol: DEFAULT_VERDICT_TOL,
        }
    }
}

impl SolverConfig {
    pub fn with_order(order_r: u32) -> Self {
        SolverConfig {
            order_r,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order_r < 1 {
            return Err(CdareError::InvalidConfig("order_r must be >= 1".into()));
        }
        if self.max_iter < 1 {
            return Err(CdareError::InvalidConfig("max_iter must be >= 1".into()));
        }
        if let Some(t) = self.tol_res {
            if t.is_nan() || t <= 0.0 {
                return Err(CdareError::InvalidConfig("tol_res must be positive".into()));
            }
        }
        if self.tol_stagnation.is_nan() || self.tol_stagnation < 0.0 {
            return Err(CdareError::InvalidConfig(
                "tol_stagnation must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Effective residual tolerance for dimension `n`.
    pub fn tol(&self, n: usize) -> f64 {
        self.tol_res.unwrap_or(n as f64 * UNIT_ROUNDOFF)
    }

    fn accepts(&self, r: &ResidualPair, tol: f64) -> bool {
        r.res <= tol || (self.use_nres && r.nres <= tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    FixedPoint,
    Accelerated { order: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    /// Semigroup index of the recorded `H` iterate (`r^k` when accelerated).
    pub index: u64,
    pub res: f64,
    pub nres: f64,
    pub wall_time: f64,
    pub min_eig_h: Option<f64>,
    pub min_eig_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterTrace {
    pub method: Method,
    pub records: Vec<IterRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterates: Vec<CMatrix>,
}

impl IterTrace {
    pub fn new(method: Method) -> Self {
        IterTrace {
            method,
            records: Vec::new(),
            iterates: Vec::new(),
        }
    }
}

impl Default for IterTrace {
    fn default() -> Self {
        IterTrace::new(Method::FixedPoint)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    MaxIterExceeded,
    Stagnated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NegativeStatus {
    Computed,
    SingularA,
    /// The method does not produce `G_inf`, or the run did not converge.
    NotAvailable,
    ValidationFailed {
        res: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x_pos: CMatrix,
    pub x_neg: Option<CMatrix>,
    pub negative_status: NegativeStatus,
    /// Residuals of `x_neg` in the original equation.
    #[serde(default)]
    pub negative_residual: Option<ResidualPair>,
    pub converged: bool,
    pub verdict: Verdict,
    pub iterations: usize,
    pub residual: ResidualPair,
    pub tol: f64,
    pub trace: IterTrace,
    pub diagnostics: Option<SpectralDiagnostics>,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
}

fn not_well_posed(k: usize, err: CdareError, trace: &IterTrace) -> CdareError {
    match err {
        CdareError::NotWellPosed { .. } => err,
        other => CdareError::NotWellPosed {
            k,
            reason: other.to_string(),
            trace: Box::new(trace.clone()),
        },
    }
}

/// Runs the configured method: fixed point for `order_r == 1`, accelerated
/// otherwise.
pub fn solve(p: &CdareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    if cfg.order_r == 1 {
        fixed_point_solve(p, cfg)
    } else {
        accelerated_solve(p, cfg)
    }
}

/// `X_1 = H`, `X_{k+1} = F(X_k)` until `Res` (or `NRes`) drops to the
/// tolerance. The reported iteration count is the index of the accepted
/// iterate, so `A = 0` converges at `k = 1`.
pub fn fixed_point_solve(p: &CdareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let start = Instant::now();
    let n = p.n();
    let tol = cfg.tol(n);
    let mut warnings = Vec::new();
    let mut trace = IterTrace::new(Method::FixedPoint);

    if p.sign() == Sign::Minus {
        if let Err(e) = transform_to_dare(p) {
            warn!("minus-sign precondition failed, iterating anyway: {e}");
            warnings.push(format!("precondition G1 > 0 and H1 > 0 failed: {e}"));
        }
    }

    let mut x = p.h().clone();
    let mut best: Option<(CMatrix, ResidualPair, usize)> = None;
    let mut verdict = Verdict::MaxIterExceeded;
    let mut stalled = 0;

    for k in 1..=cfg.max_iter {
        let fx = apply_f(p, &x).map_err(|e| not_well_posed(k, e, &trace))?;
        let r = residual_with_fx(p, &x, &fx).map_err(|e| not_well_posed(k, e, &trace))?;
        let min_eig_h = cfg
            .check_wellposed_each_step
            .then(|| hermitian_eigenvalues(&x)[0]);
        trace.records.push(IterRecord {
            k,
            index: k as u64,
            res: r.res,
            nres: r.nres,
            wall_time: start.elapsed().as_secs_f64(),
            min_eig_h,
            min_eig_g: None,
        });
        if cfg.record_iterates {
            trace.iterates.push(x.clone());
        }
        if best.as_ref().is_none_or(|(_, b, _)| r.res < b.res) {
            best = Some((x.clone(), r, k));
        }
        if cfg.accepts(&r, tol) {
            verdict = Verdict::Converged;
            best = Some((x.clone(), r, k));
            break;
        }
        if r.res <= cfg.tol_stagnation * x.norm_fro() {
            stalled += 1;
            if stalled >= STAGNATION_WINDOW {
                verdict = Verdict::Stagnated;
                break;
            }
        } else {
            stalled = 0;
        }
        x = fx;
    }

    let (x_pos, residual, accepted_at) = best.expect("at least one iteration runs");
    let converged = verdict == Verdict::Converged;
    let iterations = if converged {
        accepted_at
    } else {
        trace.records.len()
    };
    debug!(
        "fixed point finished: {verdict:?} after {iterations} steps, res {:e}",
        residual.res
    );

    let diagnostics = if converged {
        transform_to_dare_unchecked(p)
            .and_then(|t1| analysis::compute_diagnostics(p, &t1, &x_pos, None))
            .map_err(|e| warnings.push(format!("diagnostics unavailable: {e}")))
            .ok()
    } else {
        None
    };

    Ok(SolveReport {
        x_pos,
        x_neg: None,
        negative_status: NegativeStatus::NotAvailable,
        negative_residual: None,
        converged,
        verdict,
        iterations,
        residual,
        tol,
        trace,
        diagnostics,
        warnings,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

fn residual_with_fx(p: &CdareProblem, x: &CMatrix, fx: &CMatrix) -> Result<ResidualPair> {
    let res = (x - fx).norm_fro();
    let delta = inverse(&(CMatrix::identity(p.n()) + p.g() * x))?;
    let an = p.a().norm_fro();
    let denom = p.h().norm_fro() + an * an * x.norm_fro() * delta.norm_fro();
    Ok(ResidualPair {
        res,
        nres: res / denom,
    })
}

/// One step of the plain recursion:
/// `A_{k+1} = A_1 D A_k`, `G_{k+1} = G_1 + A_1 D G_k A_1^H`,
/// `H_{k+1} = H_k + A_k^H H_1 D A_k` with `D = (I + G_k H_1)^{-1}`.
pub fn semigroup_step(t: &DareTriple, initial: &DareTriple) -> Result<DareTriple> {
    let next = t.k.saturating_add(initial.k);
    let wrap = |e: CdareError| CdareError::NotWellPosed {
        k: next as usize,
        reason: e.to_string(),
        trace: Box::default(),
    };
    let n = t.a.rows();
    let m = CMatrix::identity(n) + &t.g * &initial.h;
    let (d_a, _) = solve_linear_cond(&m, &t.a).map_err(wrap)?;
    let (d_g, _) = solve_linear_cond(&m, &t.g).map_err(wrap)?;
    let a = &initial.a * &d_a;
    let g = &initial.g + &initial.a * d_g * conj_transpose(&initial.a);
    let h = &t.h + conj_transpose(&t.a) * &initial.h * d_a;
    Ok(DareTriple::new(a, symmetrize(&g), symmetrize(&h), next))
}

/// Semigroup composition of `t_i` and `t_j` into `t_{i+j}`:
/// `A = A_j M^{-1} A_i`, `G = G_j + A_j M^{-1} G_i A_j^H`,
/// `H = H_i + A_i^H H_j M^{-1} A_i` with `M = I + G_i H_j`.
pub fn semigroup_combine(ti: &DareTriple, tj: &DareTriple) -> Result<DareTriple> {
    combine_cond(ti, tj).map(|(t, _)| t)
}

fn combine_cond(ti: &DareTriple, tj: &DareTriple) -> Result<(DareTriple, f64)> {
    let next = ti.k.saturating_add(tj.k);
    let wrap = |e: CdareError| CdareError::NotWellPosed {
        k: next as usize,
        reason: e.to_string(),
        trace: Box::default(),
    };
    let n = ti.a.rows();
    let m = CMatrix::identity(n) + &ti.g * &tj.h;
    let (d_a, cond) = solve_linear_cond(&m, &ti.a).map_err(wrap)?;
    let (d_g, _) = solve_linear_cond(&m, &ti.g).map_err(wrap)?;
    let a = &tj.a * &d_a;
    let g = &tj.g + &tj.a * d_g * conj_transpose(&tj.a);
    let h = &ti.h + conj_transpose(&ti.a) * &tj.h * d_a;
    Ok((
        DareTriple::new(a, symmetrize(&g), symmetrize(&h), next),
        cond,
    ))
}

/// `t_1, ..., t_m` of the plain recursion.
pub fn plain_sequence(initial: &DareTriple, m: usize) -> Result<Vec<DareTriple>> {
    let mut out = Vec::with_capacity(m);
    if m == 0 {
        return Ok(out);
    }
    out.push(initial.clone());
    for _ in 1..m {
        let next = semigroup_step(out.last().expect("non-empty"), initial)?;
        out.push(next);
    }
    Ok(out)
}

/// One outer step of the accelerated scheme: `hat` is combined with the
/// running triple `r - 1` times, taking index `s` to `r * s`.
pub fn accelerate_step(hat: &DareTriple, r: u32) -> Result<DareTriple> {
    accelerate_step_cond(hat, r).map(|(t, _)| t)
}

fn accelerate_step_cond(hat: &DareTriple, r: u32) -> Result<(DareTriple, f64)> {
    let mut cur = hat.clone();
    let mut worst = 1.0f64;
    for _ in 1..r {
        let (next, cond) = combine_cond(hat, &cur)?;
        worst = worst.max(cond);
        cur = next;
    }
    Ok((cur, worst))
}

/// `hat_1, ..., hat_steps` starting from `t_1`.
pub fn accelerated_iterates(t1: &DareTriple, r: u32, steps: usize) -> Result<Vec<DareTriple>> {
    let mut out = Vec::with_capacity(steps);
    let mut hat = t1.clone();
    for _ in 0..steps {
        hat = accelerate_step(&hat, r)?;
        out.push(hat.clone());
    }
    Ok(out)
}

/// Order-`r` accelerated solve (`cfg.order_r >= 2`).
///
/// Convergence is measured by the residual of `H_hat` in the original
/// conjugate equation. On success the negative definite solution
/// `-G_inf^{-1}` is also extracted when `A` is nonsingular.
pub fn accelerated_solve(p: &CdareProblem, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let r = cfg.order_r;
    if r < 2 {
        return Err(CdareError::InvalidConfig(
            "accelerated solve needs order_r >= 2".into(),
        ));
    }
    let start = Instant::now();
    let n = p.n();
    let tol = cfg.tol(n);
    let mut warnings = Vec::new();
    let mut trace = IterTrace::new(Method::Accelerated { order: r });

    let t1 = transform_to_dare(p)?;
    let mut hat = t1.clone();
    let mut best: Option<(DareTriple, ResidualPair, usize)> = None;
    let mut verdict = Verdict::MaxIterExceeded;
    let mut stalled = 0;

    for k in 1..=cfg.max_iter {
        let (next, cond) =
            accelerate_step_cond(&hat, r).map_err(|e| not_well_posed(k, e, &trace))?;
        if cond > 1.0 / UNIT_ROUNDOFF {
            warnings.push(format!(
                "step {k}: ill-conditioned solve (estimate {cond:e})"
            ));
        }
        let rp = residuals(p, &next.h).map_err(|e| not_well_posed(k, e, &trace))?;

        let (min_eig_h, min_eig_g) = if cfg.check_wellposed_each_step {
            let mh = hermitian_eigenvalues(&next.h)[0];
            let mg = hermitian_eigenvalues(&next.g)[0];
            let hv = hermitian_verdict(&next.h, cfg.verdict_tol);
            let gv = hermitian_verdict(&next.g, cfg.verdict_tol);
            if !hv.is_positive_definite || !gv.is_positive_definite {
                return Err(CdareError::NotWellPosed {
                    k,
                    reason: format!("iterates lost definiteness (min eig H {mh:e}, G {mg:e})"),
                    trace: Box::new(trace),
                });
            }
            (Some(mh), Some(mg))
        } else {
            (None, None)
        };
        trace.records.push(IterRecord {
            k,
            index: next.k,
            res: rp.res,
            nres: rp.nres,
            wall_time: start.elapsed().as_secs_f64(),
            min_eig_h,
            min_eig_g,
        });
        if cfg.record_iterates {
            trace.iterates.push(next.h.clone());
        }

        let step = (&next.h - &hat.h).norm_fro();
        let prev_norm = hat.h.norm_fro();
        hat = next;
        if best.as_ref().is_none_or(|(_, b, _)| rp.res < b.res) {
            best = Some((hat.clone(), rp, k));
        }
        if cfg.accepts(&rp, tol) {
            verdict = Verdict::Converged;
            best = Some((hat.clone(), rp, k));
            break;
        }
        if step <= cfg.tol_stagnation * prev_norm {
            stalled += 1;
            if stalled >= STAGNATION_WINDOW {
                verdict = Verdict::Stagnated;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let (final_hat, residual, accepted_at) = best.expect("at least one iteration runs");
    let converged = verdict == Verdict::Converged;
    let iterations = if converged {
        accepted_at
    } else {
        trace.records.len()
    };
    debug!(
        "accelerated r={r} finished: {verdict:?} after {iterations} steps, res {:e}",
        residual.res
    );

    let (x_neg, negative_status) = if !converged {
        (None, NegativeStatus::NotAvailable)
    } else {
        match negative_solution(p, &final_hat.g, tol) {
            Ok(x) => (Some(x), NegativeStatus::Computed),
            Err(CdareError::SingularA) => (None, NegativeStatus::SingularA),
            Err(CdareError::ValidationFailed { res }) => {
                warnings.push(format!("negative solution failed validation (res {res:e})"));
                (None, NegativeStatus::ValidationFailed { res })
            }
            Err(e) => {
                warnings.push(format!("negative solution unavailable: {e}"));
                (None, NegativeStatus::NotAvailable)
            }
        }
    };

    let negative_residual = x_neg.as_ref().and_then(|x| residuals(p, x).ok());

    let diagnostics = if converged {
        analysis::compute_diagnostics(p, &t1, &final_hat.h, Some(&final_hat.g))
            .map_err(|e| warnings.push(format!("diagnostics unavailable: {e}")))
            .ok()
    } else {
        None
    };

    Ok(SolveReport {
        x_pos: final_hat.h,
        x_neg,
        negative_status,
        negative_residual,
        converged,
        verdict,
        iterations,
        residual,
        tol,
        trace,
        diagnostics,
        warnings,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// `-G_inf^{-1}`, validated as a Hermitian negative definite solution of the
/// original equation. Requires `A` nonsingular.
///
/// The equation map is expanding near the negative solution, so even the
/// correctly rounded solution can leave a residual far above `tol`. The
/// residual check therefore accepts `res <= max(10 tol, sqrt(u)) max(1, ||H||)`
/// or `nres <= max(10 tol, sqrt(u))`, which still rejects non-solutions.
pub fn negative_solution(p: &CdareProblem, g_inf: &CMatrix, tol: f64) -> Result<CMatrix> {
    if numerical_rank(p.a()) < p.n() {
        return Err(CdareError::SingularA);
    }
    let gv = hermitian_verdict(g_inf, DEFAULT_VERDICT_TOL);
    if !gv.is_positive_definite {
        return Err(CdareError::NotPositiveDefinite("G_inf".into()));
    }
    let x = symmetrize(&-inverse(g_inf)?);
    let rp = match residuals(p, &x) {
        Ok(rp) => rp,
        Err(_) => return Err(CdareError::ValidationFailed { res: f64::INFINITY }),
    };
    let neg_definite = hermitian_verdict(&-&x, DEFAULT_VERDICT_TOL).is_positive_definite;
    let scale = 1f64.max(p.h().norm_fro());
    let bound = (10.0 * tol).max(UNIT_ROUNDOFF.sqrt());
    if neg_definite && (rp.res <= bound * scale || rp.nres <= bound) {
        Ok(x)
    } else {
        Err(CdareError::ValidationFailed { res: rp.res })
    }
}
