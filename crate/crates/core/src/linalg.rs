// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra used throughout the crate.
//!
//! Storage is [`faer::Mat`]; this module is the only place that talks to the
//! faer decomposition API, so the rest of the crate sees plain functions
//! returning owned matrices and `Vec`s.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, MatRef, Side};

use crate::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn adjoint(m: MatRef<'_, C64>) -> CMat {
    m.adjoint().to_owned()
}

pub fn transpose(m: MatRef<'_, C64>) -> CMat {
    m.transpose().to_owned()
}

pub fn conjugate(m: MatRef<'_, C64>) -> CMat {
    m.conjugate().to_owned()
}

/// `z · m`.
pub fn scale(m: MatRef<'_, C64>, z: C64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * z)
}

/// Frobenius norm.
pub fn frobenius(m: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Largest entry magnitude.
pub fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut acc: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc = acc.max(m[(i, j)].norm());
        }
    }
    acc
}

/// Induced 1-norm (max column sum).
pub fn norm_one(m: MatRef<'_, C64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn trace(m: MatRef<'_, C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `max |M - M†|`.
pub fn hermiticity_defect(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut acc: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            acc = acc.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    acc
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> CMat {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// The scaled matrix has 1-norm at most 1/2, where 20 Taylor terms leave a
/// remainder below `0.5^21 / 21!`.
pub fn expm(m: MatRef<'_, C64>) -> CMat {
    let n = m.nrows();
    let norm = norm_one(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = C64::from(0.5f64.powi(squarings as i32));
    let scaled = Mat::from_fn(n, n, |i, j| m[(i, j)] * scale);

    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=20 {
        term = &term * &scaled;
        let inv_k = C64::from(1.0 / k as f64);
        term = Mat::from_fn(n, n, |i, j| term[(i, j)] * inv_k);
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvectors (columns).
pub fn hermitian_eigen(m: MatRef<'_, C64>) -> Result<(Vec<f64>, CMat)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Right eigendecomposition of a general complex matrix: eigenvalues and
/// eigenvector columns. Ordering is whatever the backend returns.
pub fn eigen(m: MatRef<'_, C64>) -> Result<(Vec<C64>, CMat)> {
    let evd = m.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

pub fn eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

fn check_finite(m: &CMat, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::SingularSystem(format!("{what}: non-finite result")));
            }
        }
    }
    Ok(())
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn solve(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let x = a.partial_piv_lu().solve(b);
    check_finite(&x, "LU solve")?;
    // Partial pivoting does not report rank deficiency; judge by residual.
    let residual = frobenius((&(a * &x) - b).as_ref());
    let scale = frobenius(a) * frobenius(x.as_ref()) + frobenius(b);
    if residual > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::SingularSystem(format!(
            "LU residual {residual:.3e} relative to scale {scale:.3e}"
        )));
    }
    Ok(x)
}

pub fn inverse(a: MatRef<'_, C64>) -> Result<CMat> {
    let inv = a.partial_piv_lu().inverse();
    check_finite(&inv, "inverse")?;
    let n = a.nrows();
    let defect = frobenius((&(a * &inv) - identity(n)).as_ref());
    if defect > 1e-6 * (n as f64).sqrt() {
        return Err(Error::SingularSystem(format!(
            "inverse defect ‖A·A⁻¹ − I‖ = {defect:.3e}"
        )));
    }
    Ok(inv)
}

/// Column vector from a slice.
pub fn column(values: &[C64]) -> CMat {
    Mat::from_fn(values.len(), 1, |i, _| values[i])
}

/// Real matrix lifted to complex entries.
pub fn from_real(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> CMat {
    Mat::from_fn(rows, cols, |i, j| C64::from(f(i, j)))
}
