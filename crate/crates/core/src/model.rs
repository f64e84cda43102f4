//! Problem definition for the conjugate DARE
//! `X = H ± A^H conj(X) (I + G conj(X))^{-1} A`, its right-hand-side operator,
//! the reduction to a standard DARE and residual metrics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CdareError, Result};
use crate::matcore::{
    conj, conj_transpose, hermitian_verdict, inverse, solve_linear, symmetrize, transpose, CMatrix,
    DEFAULT_VERDICT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "plus",
            Sign::Minus => "minus",
        })
    }
}

impl std::str::FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "plus" | "+" => Ok(Sign::Plus),
            "minus" | "-" => Ok(Sign::Minus),
            other => Err(format!("unknown sign `{other}` (expected plus or minus)")),
        }
    }
}

/// Coefficients `(A, G, H)` and sign of a conjugate DARE.
#[derive(Debug, Clone, PartialEq)]
pub struct CdareProblem {
    a: CMatrix,
    g: CMatrix,
    h: CMatrix,
    sign: Sign,
}

impl CdareProblem {
    /// Validates shapes and that `G` and `H` are Hermitian positive definite.
    pub fn new(a: CMatrix, g: CMatrix, h: CMatrix, sign: Sign) -> Result<Self> {
        let n = a.rows();
        for (name, m) in [("A", &a), ("G", &g), ("H", &h)] {
            if m.rows() != n || m.cols() != n {
                return Err(CdareError::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        for (name, m) in [("G", &g), ("H", &h)] {
            let v = hermitian_verdict(m, DEFAULT_VERDICT_TOL);
            if !v.is_hermitian {
                return Err(CdareError::NotHermitian(name.into()));
            }
            if !v.is_positive_definite {
                return Err(CdareError::NotPositiveDefinite(format!(
                    "{name} (min eigenvalue {:e})",
                    v.min_eigenvalue
                )));
            }
        }
        Ok(CdareProblem {
            a,
            g: symmetrize(&g),
            h: symmetrize(&h),
            sign,
        })
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }
}

/// A triple `(A_k, G_k, H_k)` of the standard DARE recursion, tagged with its
/// semigroup index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DareTriple {
    pub a: CMatrix,
    pub g: CMatrix,
    pub h: CMatrix,
    pub k: u64,
}

impl DareTriple {
    pub fn new(a: CMatrix, g: CMatrix, h: CMatrix, k: u64) -> Self {
        DareTriple { a, g, h, k }
    }

    /// Largest relative Frobenius difference over the three components.
    pub fn rel_diff(&self, other: &DareTriple) -> f64 {
        let floor = f64::MIN_POSITIVE;
        self.a
            .rel_diff(&other.a, floor)
            .max(self.g.rel_diff(&other.g, floor))
            .max(self.h.rel_diff(&other.h, floor))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub res: f64,
    pub nres: f64,
}

/// `(I + G X)^{-1} rhs`.
pub(crate) fn delta_solve(g: &CMatrix, x: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    let n = g.rows();
    solve_linear(&(CMatrix::identity(n) + g * x), rhs)
}

fn is_hermitian(x: &CMatrix) -> bool {
    hermitian_verdict(x, DEFAULT_VERDICT_TOL).is_hermitian
}

/// `F(X) = H ± A^H conj(X) (I + G conj(X))^{-1} A`.
pub fn apply_f(p: &CdareProblem, x: &CMatrix) -> Result<CMatrix> {
    let xb = conj(x);
    let z = delta_solve(&p.g, &xb, &p.a)?;
    let out = &p.h + (conj_transpose(&p.a) * &xb * z).scale(p.sign.factor());
    Ok(if is_hermitian(x) {
        symmetrize(&out)
    } else {
        out
    })
}

fn transform_raw(p: &CdareProblem) -> Result<DareTriple> {
    let s = p.sign.factor();
    let hb = conj(&p.h);
    let ab = conj(&p.a);
    // (I + G conj(H))^{-1} [A, G conj(A)^H]
    let da = delta_solve(&p.g, &hb, &p.a)?;
    let dg = delta_solve(&p.g, &hb, &(&p.g * transpose(&p.a)))?;
    let a1 = &ab * &da;
    let g1 = symmetrize(&(conj(&p.g) + (&ab * dg).scale(s)));
    let h1 = symmetrize(&(&p.h + (conj_transpose(&p.a) * &hb * &da).scale(s)));
    Ok(DareTriple::new(a1, g1, h1, 1))
}

/// Reduction of the conjugate equation to the standard DARE
/// `X = H1 + A1^H X (I + G1 X)^{-1} A1`.
///
/// For the minus sign this fails with `NotPositiveDefinite` when `G1` or
/// `H1` is not positive definite.
pub fn transform_to_dare(p: &CdareProblem) -> Result<DareTriple> {
    let t = transform_raw(p)?;
    if p.sign == Sign::Minus {
        check_pd(&t.g, "G1")?;
        check_pd(&t.h, "H1")?;
    }
    Ok(t)
}

/// As [`transform_to_dare`] without the definiteness gate.
pub fn transform_to_dare_unchecked(p: &CdareProblem) -> Result<DareTriple> {
    transform_raw(p)
}

fn check_pd(m: &CMatrix, name: &str) -> Result<()> {
    let v = hermitian_verdict(m, DEFAULT_VERDICT_TOL);
    if v.is_positive_definite {
        Ok(())
    } else {
        Err(CdareError::NotPositiveDefinite(format!(
            "{name} (min eigenvalue {:e})",
            v.min_eigenvalue
        )))
    }
}

/// Right-hand side of a standard DARE, `H + A^H X (I + G X)^{-1} A`.
pub fn apply_dare(t: &DareTriple, x: &CMatrix) -> Result<CMatrix> {
    let z = delta_solve(&t.g, x, &t.a)?;
    let out = &t.h + conj_transpose(&t.a) * x * z;
    Ok(if is_hermitian(x) {
        symmetrize(&out)
    } else {
        out
    })
}

/// `F(F(X))`, evaluated through the transformed triple `(A1, G1, H1)`.
pub fn apply_f_squared(p: &CdareProblem, x: &CMatrix) -> Result<CMatrix> {
    let t = transform_raw(p)?;
    apply_dare(&t, x)
}

/// `Res = ||X - F(X)||_F` and
/// `NRes = Res / (||H||_F + ||A||_F^2 ||X||_F ||(I + G X)^{-1}||_F)`.
pub fn residuals(p: &CdareProblem, x: &CMatrix) -> Result<ResidualPair> {
    let fx = apply_f(p, x)?;
    let res = (x - &fx).norm_fro();
    let delta = inverse(&(CMatrix::identity(p.n()) + &p.g * x))?;
    let an = p.a.norm_fro();
    let denom = p.h.norm_fro() + an * an * x.norm_fro() * delta.norm_fro();
    Ok(ResidualPair {
        res,
        nres: res / denom,
    })
}

/// The dual equation `X = conj(G) ± conj(A) conj(X) (I + conj(H) conj(X))^{-1} A^T`,
/// written as the problem `(A^T, conj(H), conj(G))`.
pub fn dual_problem(p: &CdareProblem) -> CdareProblem {
    CdareProblem {
        a: transpose(&p.a),
        g: conj(&p.h),
        h: conj(&p.g),
        sign: p.sign,
    }
}
