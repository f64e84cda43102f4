//! Dense complex matrix kernels.
//!
//! [`CMatrix`] wraps a column-major `nalgebra` matrix of `Complex64` and adds
//! the handful of predicates the Riccati solvers need: pivoted solves with a
//! singularity threshold, spectral radius, Hermitian/PD verdicts, the Loewner
//! order and a solver for the conjugate Stein equation `X = Q + A^H conj(X) A`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CdareError, Result};

/// Unit roundoff used throughout, `2^-52`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON;

/// Default relative tolerance for Hermitian and definiteness tests.
pub const DEFAULT_VERDICT_TOL: f64 = 1e-12;

/// Largest dimension for which the Stein equation is solved through the
/// `n^2 x n^2` Kronecker system.
pub const STEIN_KRONECKER_MAX_N: usize = 32;

/// Term budget for the series fallback of the Stein solve.
pub const STEIN_SERIES_MAX_TERMS: usize = 100_000;

const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Clone, PartialEq)]
pub struct CMatrix(DMatrix<Complex64>);

impl CMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(CdareError::DimensionMismatch(
                "matrix dimensions must be positive".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(CdareError::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_inner(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_row_major(rows, cols, &c)
    }

    pub fn from_inner(m: DMatrix<Complex64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CdareError::NonFinite);
        }
        Ok(CMatrix(m))
    }

    pub(crate) fn wrap(m: DMatrix<Complex64>) -> Self {
        CMatrix(m)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> Complex64) -> Self {
        CMatrix(DMatrix::from_fn(rows, cols, f))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(DMatrix::zeros(rows, cols))
    }

    pub fn scalar(z: Complex64) -> Self {
        CMatrix(DMatrix::from_element(1, 1, z))
    }

    pub fn real_scalar(x: f64) -> Self {
        Self::scalar(Complex64::new(x, 0.0))
    }

    pub fn from_diagonal(d: &[Complex64]) -> Self {
        let n = d.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let c: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_diagonal(&c)
    }

    pub fn inner(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<Complex64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn norm_fro(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix(&self.0 * Complex64::new(s, 0.0))
    }

    pub fn scale_complex(&self, s: Complex64) -> Self {
        CMatrix(&self.0 * s)
    }

    /// `(M + M^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        CMatrix((&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.rows());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn kronecker(&self, other: &CMatrix) -> Self {
        CMatrix(self.0.kronecker(&other.0))
    }

    /// `||self - other||_F / max(||other||_F, floor)`.
    pub fn rel_diff(&self, other: &CMatrix, floor: f64) -> f64 {
        (&self.0 - &other.0).norm() / other.norm_fro().max(floor)
    }

    fn check_same_shape(&self, other: &CMatrix, what: &str) -> Result<()> {
        if self.rows() != other.rows() || self.cols() != other.cols() {
            return Err(CdareError::DimensionMismatch(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(())
    }

    fn check_square(&self, what: &str) -> Result<()> {
        if !self.is_square() {
            return Err(CdareError::DimensionMismatch(format!(
                "{what} must be square, got {}x{}",
                self.rows(),
                self.cols()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix{:?}", self.0)
    }
}

macro_rules! impl_binop {
    ($tr:ident, $method:ident) => {
        impl $tr<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix($tr::$method(&self.0, &rhs.0))
            }
        }
        impl $tr<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix($tr::$method(self.0, rhs.0))
            }
        }
        impl $tr<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                CMatrix($tr::$method(self.0, &rhs.0))
            }
        }
        impl $tr<CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix($tr::$method(&self.0, rhs.0))
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

impl Neg for CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-self.0)
    }
}

// Serialized as row-major nested arrays of `[re, im]` pairs.
impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows())
            .map(|i| {
                (0..self.cols())
                    .map(|j| {
                        let z = self.0[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
            return Err(D::Error::custom(format!(
                "row {i} has {} entries, expected {ncols}",
                r.len()
            )));
        }
        let entries: Vec<Complex64> = rows
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        CMatrix::from_row_major(nrows, ncols, &entries).map_err(D::Error::custom)
    }
}

/// Entrywise complex conjugate.
pub fn conj(m: &CMatrix) -> CMatrix {
    CMatrix(m.0.map(|z| z.conj()))
}

/// Conjugate transpose `M^H`.
pub fn conj_transpose(m: &CMatrix) -> CMatrix {
    CMatrix(m.0.adjoint())
}

/// Plain transpose `M^T` (equal to `conj(M)^H`).
pub fn transpose(m: &CMatrix) -> CMatrix {
    CMatrix(m.0.transpose())
}

/// Solves `m Z = rhs` by partial-pivoted LU.
pub fn solve_linear(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix> {
    solve_linear_cond(m, rhs).map(|(z, _)| z)
}

/// As [`solve_linear`], also returning a cheap condition estimate
/// (ratio of the largest to the smallest pivot magnitude).
pub fn solve_linear_cond(m: &CMatrix, rhs: &CMatrix) -> Result<(CMatrix, f64)> {
    m.check_square("solve_linear coefficient")?;
    if rhs.rows() != m.rows() {
        return Err(CdareError::DimensionMismatch(format!(
            "right-hand side has {} rows, coefficient has {}",
            rhs.rows(),
            m.rows()
        )));
    }
    let threshold = UNIT_ROUNDOFF * m.norm_fro();
    let lu = m.0.clone().lu();
    let u = lu.u();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    if pmin <= threshold || pmin == 0.0 {
        return Err(CdareError::SingularMatrix {
            pivot: pmin,
            threshold,
        });
    }
    let z = lu.solve(&rhs.0).ok_or(CdareError::SingularMatrix {
        pivot: pmin,
        threshold,
    })?;
    let z = CMatrix::from_inner(z)?;
    Ok((z, pmax / pmin))
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    solve_linear(m, &CMatrix::identity(m.rows()))
}

/// `(x + sign * a y b)^{-1}` through the Sherman-Morrison-Woodbury expansion
/// `x^{-1} - sign * x^{-1} a (y^{-1} + sign * b x^{-1} a)^{-1} b x^{-1}`.
pub fn smw_inverse(
    x: &CMatrix,
    a: &CMatrix,
    y: &CMatrix,
    b: &CMatrix,
    sign: f64,
) -> Result<CMatrix> {
    let x_inv = inverse(x)?;
    let y_inv = inverse(y)?;
    let x_inv_a = &x_inv * a;
    let b_x_inv = b * &x_inv;
    let core = &y_inv + (b * &x_inv_a).scale(sign);
    let inner = solve_linear(&core, &b_x_inv)?;
    Ok(&x_inv - (&x_inv_a * &inner).scale(sign))
}

/// All eigenvalues of a square matrix (complex Schur form).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    m.check_square("eigenvalue input")?;
    if m.rows() == 1 {
        return Ok(vec![m.0[(0, 0)]]);
    }
    let schur = nalgebra::linalg::Schur::try_new(m.0.clone(), UNIT_ROUNDOFF, EIGEN_MAX_ITER)
        .ok_or(CdareError::EigenFailure)?;
    let ev = schur.eigenvalues().ok_or(CdareError::EigenFailure)?;
    Ok(ev.iter().copied().collect())
}

pub fn spectral_radius(m: &CMatrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Eigenvalues of the Hermitian part, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = m.hermitian_part();
    let mut ev: Vec<f64> = h.0.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Number of singular values above `n * u * sigma_max`.
pub fn numerical_rank(m: &CMatrix) -> usize {
    let sv = m.0.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let cutoff = m.rows().max(m.cols()) as f64 * UNIT_ROUNDOFF * smax;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// `(M + M^H) / 2`, used to remove roundoff drift from Hermitian iterates.
pub fn symmetrize(m: &CMatrix) -> CMatrix {
    m.hermitian_part()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermitianVerdict {
    pub is_hermitian: bool,
    pub min_eigenvalue: f64,
    pub is_positive_definite: bool,
    /// Absolute threshold the minimum eigenvalue was compared against.
    pub tolerance_used: f64,
}

pub fn hermitian_verdict(m: &CMatrix, tol: f64) -> HermitianVerdict {
    let scale = m.norm_fro();
    let asym = (&m.0 - m.0.adjoint()).norm();
    let is_hermitian = asym <= tol * scale;
    let min_eigenvalue = if m.is_square() {
        hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
    } else {
        f64::NEG_INFINITY
    };
    let tolerance_used = tol * scale;
    HermitianVerdict {
        is_hermitian,
        min_eigenvalue,
        is_positive_definite: is_hermitian && min_eigenvalue > tolerance_used,
        tolerance_used,
    }
}

/// Loewner order test `a >= b` up to `tol * max(1, ||a||, ||b||)`.
pub fn loewner_geq(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<bool> {
    a.check_same_shape(b, "loewner_geq operands")?;
    if !hermitian_verdict(a, tol).is_hermitian {
        return Err(CdareError::NotHermitian("left operand".into()));
    }
    if !hermitian_verdict(b, tol).is_hermitian {
        return Err(CdareError::NotHermitian("right operand".into()));
    }
    let scale = 1f64.max(a.norm_fro()).max(b.norm_fro());
    let d = a - b;
    let min_eig = hermitian_eigenvalues(&d)[0];
    Ok(min_eig >= -tol * scale)
}

/// Solves the conjugate Stein equation `X = Q + A^H conj(X) A`.
///
/// Substituting the equation into itself gives the ordinary Stein equation
/// `X = Q2 + M^H X M` with `M = conj(A) A` and `Q2 = Q + A^H conj(Q) A`, which
/// is solved through `(I - M^T (x) M^H) vec(X) = vec(Q2)` for
/// `n <= STEIN_KRONECKER_MAX_N` and by its Neumann series beyond that.
pub fn stein_solve_conjugate(a: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    a.check_square("Stein coefficient")?;
    a.check_same_shape(q, "Stein operands")?;
    if !hermitian_verdict(q, DEFAULT_VERDICT_TOL).is_hermitian {
        return Err(CdareError::NotHermitian("Stein right-hand side".into()));
    }
    let n = a.rows();
    let m = conj(a) * a;
    let rho = spectral_radius(&m)?;
    if rho >= 1.0 - DEFAULT_VERDICT_TOL {
        return Err(CdareError::SpectralRadiusTooLarge { rho });
    }
    let q2 = q + conj_transpose(a) * conj(q) * a;
    let x = if n <= STEIN_KRONECKER_MAX_N {
        let n2 = n * n;
        let kron = transpose(&m).kronecker(&conj_transpose(&m));
        let lhs = CMatrix::identity(n2) - kron;
        // column-major vec
        let rhs = CMatrix(DMatrix::from_column_slice(n2, 1, q2.0.as_slice()));
        let v = solve_linear(&lhs, &rhs)?;
        CMatrix(DMatrix::from_column_slice(n, n, v.0.as_slice()))
    } else {
        stein_series(&m, &q2, rho)?
    };
    Ok(symmetrize(&x))
}

fn stein_series(m: &CMatrix, q2: &CMatrix, rho: f64) -> Result<CMatrix> {
    let mh = conj_transpose(m);
    let mut term = q2.clone();
    let mut sum = q2.clone();
    for _ in 0..STEIN_SERIES_MAX_TERMS {
        term = &mh * &term * m;
        sum = &sum + &term;
        if term.norm_fro() <= UNIT_ROUNDOFF * sum.norm_fro() {
            return Ok(sum);
        }
    }
    Err(CdareError::SpectralRadiusTooLarge { rho })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            c(StandardNormal.sample(rng), StandardNormal.sample(rng))
        })
    }

    #[test]
    fn conj_fixes_reals_and_flips_imaginary() {
        let m = CMatrix::from_real_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(conj(&m), m);
        let i = CMatrix::scalar(c(0.0, 1.0));
        assert_eq!(conj(&i), CMatrix::scalar(c(0.0, -1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = random(4, &mut rng);
        assert_eq!(conj(&conj(&r)), r);
    }

    #[test]
    fn conj_transpose_cases() {
        assert_eq!(conj_transpose(&CMatrix::identity(3)), CMatrix::identity(3));
        let n = CMatrix::from_real_row_major(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let expect = CMatrix::from_real_row_major(2, 2, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(conj_transpose(&n), expect);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = (random(3, &mut rng), random(3, &mut rng));
        let lhs = conj_transpose(&(&a * &b));
        let rhs = conj_transpose(&b) * conj_transpose(&a);
        assert!((lhs - rhs).norm_fro() <= 1e-14);
    }

    #[test]
    fn solve_linear_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random(3, &mut rng);
        assert_eq!(solve_linear(&CMatrix::identity(3), &b).unwrap(), b);
        let half = solve_linear(&CMatrix::identity(3).scale(2.0), &CMatrix::identity(3)).unwrap();
        assert!((half - CMatrix::identity(3).scale(0.5)).norm_fro() < 1e-16);

        let m = random(5, &mut rng) + CMatrix::identity(5).scale(5.0);
        let rhs = random(5, &mut rng);
        let z = solve_linear(&m, &rhs).unwrap();
        assert!((&m * &z - &rhs).norm_fro() <= 1e-12 * rhs.norm_fro());
    }

    #[test]
    fn solve_linear_rejects_singular() {
        let m = CMatrix::from_real_row_major(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        let err = solve_linear(&m, &CMatrix::identity(2)).unwrap_err();
        assert!(matches!(err, CdareError::SingularMatrix { .. }));
    }

    #[test]
    fn construction_rejects_nan() {
        let err = CMatrix::from_real_row_major(1, 2, &[1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, CdareError::NonFinite));
        assert!(CMatrix::from_real_row_major(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn smw_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(3, &mut rng) + CMatrix::identity(3).scale(4.0);
        let y = random(3, &mut rng) + CMatrix::identity(3).scale(4.0);
        let b = random(3, &mut rng);
        let got = smw_inverse(&x, &CMatrix::zeros(3, 3), &y, &b, 1.0).unwrap();
        assert!(got.rel_diff(&inverse(&x).unwrap(), 1.0) < 1e-14);

        let one = CMatrix::real_scalar(1.0);
        let got = smw_inverse(&CMatrix::real_scalar(2.0), &one, &one, &one, 1.0).unwrap();
        assert!((got.get(0, 0) - c(1.0 / 3.0, 0.0)).norm() < 1e-15);

        let a = random(4, &mut rng).scale(0.3);
        let b = random(4, &mut rng).scale(0.3);
        let x = random(4, &mut rng) + CMatrix::identity(4).scale(4.0);
        let y = random(4, &mut rng) + CMatrix::identity(4).scale(4.0);
        for sign in [1.0, -1.0] {
            let direct = inverse(&(&x + (&a * &y * &b).scale(sign))).unwrap();
            let got = smw_inverse(&x, &a, &y, &b, sign).unwrap();
            assert!((got - direct).norm_fro() < 1e-12);
        }
    }

    #[test]
    fn spectral_radius_cases() {
        assert!((spectral_radius(&CMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let d = CMatrix::from_real_diagonal(&[0.5, -0.25]);
        assert!((spectral_radius(&d).unwrap() - 0.5).abs() < 1e-15);
        // companion matrix of z^2 - z - 1
        let comp = CMatrix::from_real_row_major(2, 2, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((spectral_radius(&comp).unwrap() - golden).abs() < 1e-10);
    }

    #[test]
    fn hermitian_verdict_cases() {
        let v = hermitian_verdict(&CMatrix::identity(3), 1e-12);
        assert!(v.is_hermitian && v.is_positive_definite);
        assert!((v.min_eigenvalue - 1.0).abs() < 1e-15);

        let n = CMatrix::from_real_row_major(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(!hermitian_verdict(&n, 1e-12).is_hermitian);

        let d = CMatrix::from_real_diagonal(&[1.0, -1e-18]);
        assert!(!hermitian_verdict(&d, 1e-12).is_positive_definite);
    }

    #[test]
    fn loewner_cases() {
        let i = CMatrix::identity(3);
        assert!(loewner_geq(&i.scale(2.0), &i, 1e-12).unwrap());
        assert!(!loewner_geq(&i, &i.scale(2.0), 1e-12).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random(4, &mut rng).hermitian_part();
        assert!(loewner_geq(&x, &x, 1e-12).unwrap());
        let n = CMatrix::from_real_row_major(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            loewner_geq(&n, &CMatrix::identity(2), 1e-12),
            Err(CdareError::NotHermitian(_))
        ));
    }

    #[test]
    fn stein_simple_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = random(3, &mut rng);
        let q = &r * conj_transpose(&r) + CMatrix::identity(3);
        let x = stein_solve_conjugate(&CMatrix::zeros(3, 3), &q).unwrap();
        assert!(x.rel_diff(&q, 1.0) < 1e-14);

        let x =
            stein_solve_conjugate(&CMatrix::real_scalar(0.5), &CMatrix::real_scalar(1.0)).unwrap();
        assert!((x.get(0, 0).re - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn stein_rejects_large_radius() {
        let a = CMatrix::real_scalar(1.5);
        let err = stein_solve_conjugate(&a, &CMatrix::real_scalar(1.0)).unwrap_err();
        assert!(matches!(err, CdareError::SpectralRadiusTooLarge { .. }));
    }

    #[test]
    fn rank_detects_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let u = CMatrix::from_fn(4, 1, |_, _| c(StandardNormal.sample(&mut rng), 0.3));
        let v = CMatrix::from_fn(1, 4, |_, _| c(0.1, StandardNormal.sample(&mut rng)));
        assert_eq!(numerical_rank(&(&u * &v)), 1);
        assert_eq!(numerical_rank(&CMatrix::identity(4)), 4);
    }

    #[test]
    fn json_shape_is_row_major_pairs() {
        let m = CMatrix::from_row_major(1, 2, &[c(1.0, 2.0), c(3.0, -4.0)]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[[[1.0,2.0],[3.0,-4.0]]]");
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<CMatrix>("[[[1,0]],[[1,0],[2,0]]]").is_err());
    }
}
