//! Shared fixtures and brute-force oracles for the integration tests.
//!
//! The oracles work directly on `nalgebra` matrices with explicit inverses so
//! they share no code path with the library beyond the matrix type.

#![allow(dead_code)]

use cdare_core::bench::{gen_random_problem, EnsembleSpec};
use cdare_core::matcore::CMatrix;
use cdare_core::{CdareProblem, Sign};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type M = DMatrix<Complex64>;

pub fn raw(m: &CMatrix) -> M {
    m.inner().clone()
}

pub fn wrap(m: M) -> CMatrix {
    CMatrix::from_inner(m).expect("finite matrix")
}

pub fn inv(m: &M) -> M {
    m.clone().try_inverse().expect("invertible in oracle")
}

pub fn eye(n: usize) -> M {
    M::identity(n, n)
}

pub fn conj(m: &M) -> M {
    m.map(|z| z.conj())
}

pub fn rel(a: &M, b: &M) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

pub fn spec(n: usize, seed: u64, sign: Sign) -> EnsembleSpec {
    EnsembleSpec::new(n, 1, seed, sign)
}

/// Random problem from the library generator, keyed by `(seed, idx)`.
pub fn problem(n: usize, seed: u64, idx: usize, sign: Sign) -> CdareProblem {
    gen_random_problem(&spec(n, seed, sign), idx).expect("generator")
}

/// `H + s A^H conj(X) (I + G conj(X))^{-1} A` with an explicit inverse.
pub fn oracle_f(p: &CdareProblem, x: &M) -> M {
    let (a, g, h) = (raw(p.a()), raw(p.g()), raw(p.h()));
    let n = a.nrows();
    let xb = conj(x);
    let s = p.sign().factor();
    &h + (a.adjoint() * &xb * inv(&(eye(n) + &g * &xb)) * &a) * Complex64::from(s)
}

/// Plain DARE iterate of a triple, `H + A^H X (I + G X)^{-1} A`.
pub fn oracle_dare(a: &M, g: &M, h: &M, x: &M) -> M {
    let n = a.nrows();
    h + a.adjoint() * x * inv(&(eye(n) + g * x)) * a
}

/// `k`-th iterate of the DARE fixed point started at `X_1 = H_1`; equals `H_k`.
pub fn oracle_h_k(a: &M, g: &M, h: &M, k: usize) -> M {
    let mut x = h.clone();
    for _ in 1..k {
        x = oracle_dare(a, g, h, &x);
    }
    x
}

/// Fixed point of `F` by brute iteration.
pub fn oracle_solution(p: &CdareProblem, iters: usize) -> M {
    let mut x = raw(p.h());
    for _ in 0..iters {
        x = oracle_f(p, &x);
    }
    x
}

/// Truncated unrolling of `X = Q + A^H conj(X) A`.
pub fn oracle_stein(a: &M, q: &M, terms: usize) -> M {
    let mut sum = q.clone();
    let mut term = q.clone();
    for _ in 0..terms {
        term = a.adjoint() * conj(&term) * a;
        sum += &term;
    }
    sum
}

pub fn min_eig(m: &M) -> f64 {
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    h.symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// `(A_k, G_k, H_k)` for `k = 1..=m`, built by appending `t_1` on the right
/// with explicit inverses.
pub fn oracle_triples(a: &M, g: &M, h: &M, m: usize) -> Vec<(M, M, M)> {
    let n = a.nrows();
    let mut out = vec![(a.clone(), g.clone(), h.clone())];
    for _ in 1..m {
        let (ak, gk, hk) = out.last().unwrap().clone();
        let w = inv(&(eye(n) + &gk * h));
        out.push((
            a * &w * &ak,
            g + a * &w * &gk * a.adjoint(),
            &hk + ak.adjoint() * h * &w * &ak,
        ));
    }
    out
}
