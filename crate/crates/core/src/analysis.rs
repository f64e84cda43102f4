//! Solvability gates, closed-loop spectra, iteration-count predictions and
//! empirical convergence rates.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CdareError, Result};
use crate::matcore::{
    conj, conj_transpose, eigenvalues, hermitian_verdict, inverse, solve_linear, spectral_radius,
    CMatrix, DEFAULT_VERDICT_TOL, UNIT_ROUNDOFF,
};
use crate::model::{transform_to_dare_unchecked, CdareProblem, DareTriple, Sign};
use crate::solvers::{IterTrace, Method};

/// Orders for which iteration counts are predicted.
pub const PREDICTED_ORDERS: [u32; 4] = [2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    /// `rho(conj(A) A)`, the a-priori solvability proxy.
    pub rho_conj_a_a: f64,
    pub rho_a_conj_a: f64,
    /// `rho(T_1)` with `T_1 = (I + G_1 H_inf)^{-1} A_1`.
    pub rho_t1: Option<f64>,
    pub n1_predicted: Option<u64>,
    pub nr_predicted: BTreeMap<u32, u64>,
    pub sigma_t1: Vec<Complex64>,
    /// Spectrum of `S_1^H`; empty when `G_inf` is unknown.
    pub sigma_s1h: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolvabilityVerdict {
    /// `rho(conj(A) A) < 1`.
    pub plus_ok: bool,
    /// `G_1 > 0` and `H_1 > 0` for the minus-sign transform.
    pub minus_ok: bool,
    pub rho_conj_a_a: f64,
    pub tolerance: f64,
    pub details: String,
}

pub fn check_solvability(p: &CdareProblem) -> SolvabilityVerdict {
    let tol = DEFAULT_VERDICT_TOL;
    let mut details = Vec::new();
    let rho = match spectral_radius(&(conj(p.a()) * p.a())) {
        Ok(r) => r,
        Err(e) => {
            details.push(format!("rho(conj(A)A) unavailable: {e}"));
            f64::INFINITY
        }
    };
    let plus_ok = rho < 1.0 - tol;
    details.push(format!("rho(conj(A)A) = {rho:.6e}"));

    let minus = CdareProblem::new(p.a().clone(), p.g().clone(), p.h().clone(), Sign::Minus)
        .and_then(|m| transform_to_dare_unchecked(&m));
    let minus_ok = match minus {
        Ok(t) => {
            let gv = hermitian_verdict(&t.g, tol);
            let hv = hermitian_verdict(&t.h, tol);
            details.push(format!(
                "minus transform: min eig G1 = {:.6e}, H1 = {:.6e}",
                gv.min_eigenvalue, hv.min_eigenvalue
            ));
            gv.is_positive_definite && hv.is_positive_definite
        }
        Err(e) => {
            details.push(format!("minus transform failed: {e}"));
            false
        }
    };
    SolvabilityVerdict {
        plus_ok,
        minus_ok,
        rho_conj_a_a: rho,
        tolerance: tol,
        details: details.join("; "),
    }
}

/// `T_k = (I + G_k H_inf)^{-1} A_k`; with `t = t_1` this is the closed-loop
/// matrix governing the convergence speed.
pub fn closed_loop_t1(t: &DareTriple, h_inf: &CMatrix) -> Result<CMatrix> {
    let n = t.a.rows();
    solve_linear(&(CMatrix::identity(n) + &t.g * h_inf), &t.a)
}

/// `S_k = A_k (I + G_inf H_k)^{-1}`.
pub fn closed_loop_s1(t: &DareTriple, g_inf: &CMatrix) -> Result<CMatrix> {
    let n = t.a.rows();
    Ok(&t.a * inverse(&(CMatrix::identity(n) + g_inf * &t.h))?)
}

/// Largest defect, relative to `||H_inf||` resp. `||G_inf||`, in
/// `H_inf - H_k = T_k^H H_inf A_k = T_k^H H_inf (H_inf^{-1} + G_k) H_inf T_k` and
/// `G_inf - G_k = S_k G_inf A_k^H = S_k G_inf (G_inf^{-1} + H_k) G_inf S_k^H`.
pub fn error_identity_check(tk: &DareTriple, h_inf: &CMatrix, g_inf: &CMatrix) -> Result<f64> {
    let t = closed_loop_t1(tk, h_inf)?;
    let s = closed_loop_s1(tk, g_inf)?;
    let th = conj_transpose(&t);
    let sh = conj_transpose(&s);

    let dh = h_inf - &tk.h;
    let dg = g_inf - &tk.g;
    let h1 = &th * h_inf * &tk.a;
    let h2 = &th * (h_inf + h_inf * &tk.g * h_inf) * &t;
    let g1 = &s * g_inf * conj_transpose(&tk.a);
    let g2 = &s * (g_inf + g_inf * &tk.h * g_inf) * &sh;

    let hs = h_inf.norm_fro().max(f64::MIN_POSITIVE);
    let gs = g_inf.norm_fro().max(f64::MIN_POSITIVE);
    Ok([
        (&dh - h1).norm_fro() / hs,
        (&dh - h2).norm_fro() / hs,
        (&dg - g1).norm_fro() / gs,
        (&dg - g2).norm_fro() / gs,
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationPrediction {
    pub n1: u64,
    pub nr: BTreeMap<u32, u64>,
}

/// Least iteration counts with `rho^{N1} < n u` and
/// `(rho^2)^{r^{Nr}} < n u`:
/// `N1 = floor(log10(n u) / log10(rho)) + 1` and
/// `Nr = floor(log_r(log10(n u) / log10(rho^2))) + 1`, both at least 1.
pub fn predict_iterations(rho_t1: f64, n: usize, orders: &[u32]) -> Result<IterationPrediction> {
    if !(rho_t1 > 0.0 && rho_t1 < 1.0) {
        return Err(CdareError::OutOfRange(format!(
            "rho(T1) = {rho_t1} is outside (0, 1)"
        )));
    }
    if orders.iter().any(|&r| r < 2) {
        return Err(CdareError::OutOfRange("orders must be >= 2".into()));
    }
    let target = (n as f64 * UNIT_ROUNDOFF).log10();
    let n1 = count((target / rho_t1.log10()).floor() + 1.0);
    let ratio = target / (rho_t1 * rho_t1).log10();
    let nr = orders
        .iter()
        .map(|&r| (r, count((ratio.ln() / f64::from(r).ln()).floor() + 1.0)))
        .collect();
    Ok(IterationPrediction { n1, nr })
}

fn count(x: f64) -> u64 {
    if x < 1.0 {
        1
    } else {
        x as u64
    }
}

/// Post-hoc spectral diagnostics for a solved problem.
pub fn compute_diagnostics(
    p: &CdareProblem,
    t1: &DareTriple,
    h_inf: &CMatrix,
    g_inf: Option<&CMatrix>,
) -> Result<SpectralDiagnostics> {
    let rho_conj_a_a = spectral_radius(&(conj(p.a()) * p.a()))?;
    let rho_a_conj_a = spectral_radius(&(p.a() * conj(p.a())))?;
    let t = closed_loop_t1(t1, h_inf)?;
    let sigma_t1 = eigenvalues(&t)?;
    let rho_t1 = sigma_t1.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let sigma_s1h = match g_inf {
        Some(g) => eigenvalues(&conj_transpose(&closed_loop_s1(t1, g)?))?,
        None => Vec::new(),
    };
    let (n1_predicted, nr_predicted) = match predict_iterations(rho_t1, p.n(), &PREDICTED_ORDERS) {
        Ok(pred) => (Some(pred.n1), pred.nr),
        Err(_) => (None, BTreeMap::new()),
    };
    Ok(SpectralDiagnostics {
        rho_conj_a_a,
        rho_a_conj_a,
        rho_t1: Some(rho_t1),
        n1_predicted,
        nr_predicted,
        sigma_t1,
        sigma_s1h,
    })
}

/// Largest distance between two spectra after matching eigenvalues greedily
/// in order of decreasing modulus (ties broken by argument). `None` if the
/// multisets have different sizes.
pub fn spectrum_match_distance(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let key = |z: &Complex64| (-z.norm(), z.arg());
    let mut sorted_a = a.to_vec();
    sorted_a.sort_by(|x, y| {
        key(x)
            .partial_cmp(&key(y))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut remaining = b.to_vec();
    let mut worst = 0.0f64;
    for z in sorted_a {
        let (idx, d) = remaining
            .iter()
            .enumerate()
            .map(|(i, w)| (i, (z - w).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        worst = worst.max(d);
        remaining.swap_remove(idx);
    }
    Some(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub method: Method,
    /// Least-squares slope; see [`empirical_order`].
    pub slope: f64,
    pub points: usize,
}

impl OrderEstimate {
    /// `exp(slope)`: the per-step contraction factor for the fixed point,
    /// the convergence order for the accelerated scheme.
    pub fn factor(&self) -> f64 {
        self.slope.exp()
    }
}

/// Estimates the convergence behaviour from a residual history.
///
/// Uses the leading run of strictly decreasing positive residuals. For the
/// fixed point the slope is that of `ln(res_k)` against `k`. For the
/// accelerated scheme it is the slope of `ln ln(res_k / res_{k+1})`, which
/// equals `ln r` for errors behaving like `c * q^{r^k}`.
pub fn empirical_order(trace: &IterTrace) -> Result<OrderEstimate> {
    let mut res = Vec::new();
    for rec in &trace.records {
        if rec.res.is_nan() || rec.res <= 0.0 || res.last().is_some_and(|&last| rec.res >= last) {
            break;
        }
        res.push(rec.res);
    }
    if res.len() < 4 {
        return Err(CdareError::InsufficientTrace);
    }
    let ys: Vec<f64> = match trace.method {
        Method::FixedPoint => res.iter().map(|r| r.ln()).collect(),
        Method::Accelerated { .. } => res.windows(2).map(|w| (w[0] / w[1]).ln().ln()).collect(),
    };
    let slope = lsq_slope(&ys).ok_or(CdareError::InsufficientTrace)?;
    Ok(OrderEstimate {
        method: trace.method,
        slope,
        points: ys.len(),
    })
}

fn lsq_slope(ys: &[f64]) -> Option<f64> {
    let n = ys.len() as f64;
    if ys.len() < 2 || ys.iter().any(|y| !y.is_finite()) {
        return None;
    }
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}
