// SPDX-License-Identifier: Apache-2.0

//! Operators on a truncated single-mode Fock space.
//!
//! Row and column indices are photon occupation numbers `0..d`.

use std::ops::{Add, Mul, Sub};

use faer::{Mat, MatRef};

use crate::linalg::{self, CMat, C64, ZERO};
use crate::{Error, Result};

/// A complex `d × d` matrix acting on the Fock states `|0⟩ … |d−1⟩`.
#[derive(Clone, Debug)]
pub struct FockOperator {
    mat: CMat,
}

impl FockOperator {
    pub fn from_matrix(mat: CMat) -> Result<Self> {
        if mat.nrows() == 0 {
            return Err(Error::ZeroDimension);
        }
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(Self { mat })
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            mat: Mat::from_fn(d, d, f),
        })
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            mat: linalg::identity(d),
        })
    }

    pub fn zeros(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            mat: linalg::zeros(d, d),
        })
    }

    pub fn diagonal(entries: &[C64]) -> Result<Self> {
        Self::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { ZERO })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self {
            mat: linalg::adjoint(self.mat.as_ref()),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        let d = self.dim();
        Self {
            mat: Mat::from_fn(d, d, |i, j| self.mat[(i, j)] * z),
        }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(self.matrix())
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// `self ⊗ other`, with `self` as the slow (outer) index.
    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: linalg::kron(self.matrix(), other.matrix()),
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Largest entry-wise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        linalg::max_abs((&self.mat - &other.mat).as_ref())
    }
}

impl<'a> Mul<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &'a FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl<'a> Add<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: &'a FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl<'a> Sub<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: &'a FockOperator) -> FockOperator {
        FockOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        Err(Error::ZeroDimension)
    } else {
        Ok(())
    }
}

/// Truncated annihilation operator, `â[n, n+1] = √(n+1)`.
pub fn annihilation(d: usize) -> Result<FockOperator> {
    FockOperator::from_fn(d, |i, j| {
        if j == i + 1 {
            C64::from((j as f64).sqrt())
        } else {
            ZERO
        }
    })
}

pub fn creation(d: usize) -> Result<FockOperator> {
    Ok(annihilation(d)?.dagger())
}

/// `n̂ = diag(0, 1, …, d−1)`, identical to `â†â` on the truncated space.
pub fn number(d: usize) -> Result<FockOperator> {
    FockOperator::from_fn(d, |i, j| if i == j { C64::from(i as f64) } else { ZERO })
}

/// Displacement operator `exp(α â† − α* â)` on the truncated space.
///
/// Only the low-lying block is accurate: states near `d − 1` feel the
/// truncation. Use [`unitarity_defect`] to monitor the block you rely on.
pub fn displacement(alpha: C64, d: usize) -> Result<FockOperator> {
    let a = annihilation(d)?;
    let generator = &a.dagger().scale(alpha) - &a.scale(alpha.conj());
    FockOperator::from_matrix(linalg::expm(generator.matrix()))
}

/// `max |(U†U − I)[i, j]|` restricted to the leading `block × block` corner.
pub fn unitarity_defect(op: &FockOperator, block: usize) -> f64 {
    let prod = &op.dagger() * op;
    let block = block.min(op.dim());
    let mut worst: f64 = 0.0;
    for j in 0..block {
        for i in 0..block {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod.get(i, j) - target).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Explicit-sum associated Laguerre polynomial, independent of the
    /// recurrence used in `josephson`.
    fn laguerre1_by_sum(n: usize, x: f64) -> f64 {
        let binom = |top: usize, k: usize| -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (top - i) as f64 / (i + 1) as f64)
        };
        let mut fact = 1.0;
        let mut acc = 0.0;
        for k in 0..=n {
            if k > 0 {
                fact *= k as f64;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * binom(n + 1, n - k) * x.powi(k as i32) / fact;
        }
        acc
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(annihilation(0), Err(Error::ZeroDimension)));
        assert!(matches!(number(0), Err(Error::ZeroDimension)));
    }

    #[test]
    fn annihilation_small_cases() {
        let a2 = annihilation(2).unwrap();
        assert_eq!(a2.get(0, 1), C64::from(1.0));
        assert_eq!(a2.get(0, 0), ZERO);
        assert_eq!(a2.get(1, 0), ZERO);
        assert_eq!(a2.get(1, 1), ZERO);
        let a3 = annihilation(3).unwrap();
        assert_eq!(a3.get(1, 2), C64::from(2f64.sqrt()));
    }

    #[test]
    fn commutator_is_identity_except_boundary() {
        let d = 7;
        let a = annihilation(d).unwrap();
        let c = a.commutator(&a.dagger());
        for i in 0..d {
            for j in 0..d {
                let want = if i == j && i < d - 1 { 1.0 } else { 0.0 };
                if i == d - 1 && j == d - 1 {
                    assert!((c.get(i, j) + (d - 1) as f64).norm() < 1e-13);
                } else {
                    assert!((c.get(i, j) - want).norm() < 1e-13, "({i},{j}) {}", c.get(i, j));
                }
            }
        }
    }

    #[test]
    fn number_operator() {
        let n3 = number(3).unwrap();
        for i in 0..3 {
            assert_eq!(n3.get(i, i), C64::from(i as f64));
        }
        let a = annihilation(5).unwrap();
        let n = number(5).unwrap();
        assert!((&a.dagger() * &a).max_abs_diff(&n) < 1e-15);
        assert_eq!(number(4).unwrap().trace(), C64::from(6.0));
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement(ZERO, 6).unwrap();
        assert!(d.max_abs_diff(&FockOperator::identity(6).unwrap()) < 1e-15);
    }

    #[test]
    fn displaced_fock_overlap_matches_closed_form() {
        let phi0_sq: f64 = 2.0;
        let phi0 = phi0_sq.sqrt();
        let dop = displacement(C64::new(0.0, phi0), 25).unwrap();
        for n in 0..4 {
            let closed = C64::new(0.0, phi0)
                * (-phi0_sq / 2.0).exp()
                * laguerre1_by_sum(n, phi0_sq)
                / ((n + 1) as f64).sqrt();
            let got = dop.get(n + 1, n);
            assert!(
                (got - closed).norm() < 1e-10,
                "n = {n}: {got} vs {closed}"
            );
        }
    }

    #[test]
    fn displacement_unitarity_on_low_block() {
        let dop = displacement(C64::new(0.0, 1.0), 30).unwrap();
        assert!(unitarity_defect(&dop, 5) < 1e-10);
    }

    #[test]
    fn displacement_inverse_improves_with_dimension() {
        let alpha = C64::new(0.7, -0.4);
        let defect = |d: usize| {
            let p = displacement(alpha, d).unwrap();
            let m = displacement(-alpha, d).unwrap();
            let prod = &p * &m;
            let mut worst: f64 = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    let t = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((prod.get(i, j) - t).norm());
                }
            }
            worst
        };
        let coarse = defect(8);
        let fine = defect(20);
        assert!(fine < coarse);
        assert!(fine < 1e-10);
    }

    proptest! {
        #[test]
        fn number_spectrum_is_exact(d in 1usize..30) {
            let n = number(d).unwrap();
            for i in 0..d {
                prop_assert_eq!(n.get(i, i), C64::from(i as f64));
            }
        }
    }
}
