// SPDX-License-Identifier: Apache-2.0

//! Lindblad generators on column-stacked density matrices.
//!
//! `vec(ρ)[i + j·d] = ρ[i, j]`, hence `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)` and
//!
//! ```text
//! L = −i (I ⊗ H − Hᵀ ⊗ I)
//!     + Σ_k r_k [ L̄_k ⊗ L_k − ½ I ⊗ (L_k†L_k) − ½ (L_k†L_k)ᵀ ⊗ I ].
//! ```

use faer::{Mat, MatRef};

use crate::hilbert::FockOperator;
use crate::linalg::{self, CMat, C64, ONE, ZERO};
use crate::{Error, Result};

/// Largest Liouvillian dimension (`d²`) handled by the dense eigensolver.
pub const EIGEN_BUDGET: usize = 2000;

const ZERO_MODE_TOL: f64 = 1e-9;

/// A Lindblad generator together with the operators it was built from.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    matrix: CMat,
    hamiltonian: FockOperator,
    collapse_ops: Vec<(FockOperator, f64)>,
}

impl Liouvillian {
    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `d² × d²` generator.
    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.matrix.as_ref()
    }

    pub fn hamiltonian(&self) -> &FockOperator {
        &self.hamiltonian
    }

    pub fn collapse_ops(&self) -> &[(FockOperator, f64)] {
        &self.collapse_ops
    }

    /// `L[ρ]` evaluated through the superoperator matrix.
    pub fn apply(&self, rho: MatRef<'_, C64>) -> Result<CMat> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        let v = vectorize(rho);
        Ok(unvectorize((&self.matrix * &v).as_ref(), self.dim))
    }

    /// `‖vec(I)ᵀ L‖`: zero for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let n = d * d;
        let mut worst: f64 = 0.0;
        for col in 0..n {
            let s: C64 = (0..d).map(|i| self.matrix[(i + i * d, col)]).sum();
            worst = worst.max(s.norm());
        }
        worst
    }

    pub fn eigendecompose(&self) -> Result<SpectralDecomposition> {
        eigendecompose(self)
    }
}

/// Column-stacked `vec(ρ)` as a `d² × 1` matrix.
pub fn vectorize(m: MatRef<'_, C64>) -> CMat {
    let d = m.nrows();
    Mat::from_fn(d * m.ncols(), 1, |k, _| m[(k % d, k / d)])
}

/// Inverse of [`vectorize`] for a `d × d` matrix.
pub fn unvectorize(v: MatRef<'_, C64>, d: usize) -> CMat {
    Mat::from_fn(d, d, |i, j| v[(i + j * d, 0)])
}

/// Row vector `vec(Aᵀ)ᵀ`, so that `Tr(A X) = row · vec(X)`.
pub fn trace_functional(a: MatRef<'_, C64>) -> Vec<C64> {
    let d = a.nrows();
    (0..d * d).map(|k| a[(k / d, k % d)]).collect()
}

pub fn build_liouvillian(h: &FockOperator, collapse: &[(FockOperator, f64)]) -> Result<Liouvillian> {
    let d = h.dim();
    for (op, rate) in collapse {
        if op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.dim(),
            });
        }
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::param("rate", format!("collapse rates must be ≥ 0, got {rate}")));
        }
    }
    let id = linalg::identity(d);
    let hm = h.matrix();
    let mi = C64::new(0.0, -1.0);
    let mut matrix = &linalg::kron(id.as_ref(), hm) - &linalg::kron(hm.transpose(), id.as_ref());
    matrix = Mat::from_fn(d * d, d * d, |i, j| matrix[(i, j)] * mi);
    for (op, rate) in collapse {
        if *rate == 0.0 {
            continue;
        }
        let l = op.matrix();
        let ldl = l.adjoint() * l;
        let jump = linalg::kron(linalg::conjugate(l).as_ref(), l);
        let left = linalg::kron(id.as_ref(), ldl.as_ref());
        let right = linalg::kron(ldl.transpose(), id.as_ref());
        let r = *rate;
        matrix = Mat::from_fn(d * d, d * d, |i, j| {
            matrix[(i, j)] + (jump[(i, j)] - (left[(i, j)] + right[(i, j)]) * 0.5) * r
        });
    }
    Ok(Liouvillian {
        dim: d,
        matrix,
        hamiltonian: h.clone(),
        collapse_ops: collapse.to_vec(),
    })
}

/// A density matrix. Constructors that come out of solvers validate the
/// physical invariants; [`DensityMatrix::from_matrix_unchecked`] does not.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace, and positivity to `1e−9`.
    pub fn new(mat: CMat) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(mat)?;
        let herm = rho.hermiticity_defect();
        if herm > 1e-10 {
            return Err(Error::NotHermitian(herm));
        }
        let tr = rho.trace();
        if (tr - ONE).norm() > 1e-10 {
            return Err(Error::param("rho", format!("trace {tr} ≠ 1")));
        }
        let min = rho.min_eigenvalue()?;
        if min < -1e-9 {
            return Err(Error::param("rho", format!("negative eigenvalue {min:.3e}")));
        }
        Ok(rho)
    }

    pub fn from_matrix_unchecked(mat: CMat) -> Result<Self> {
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

    /// Pure state `|k⟩⟨k|` on `d` levels.
    pub fn fock(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::param("k", format!("Fock index {k} ≥ dimension {d}")));
        }
        Self::from_matrix_unchecked(Mat::from_fn(d, d, |i, j| if i == k && j == k { ONE } else { ZERO }))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn matrix(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(self.matrix())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(self.matrix())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let herm = Mat::from_fn(self.dim(), self.dim(), |i, j| {
            (self.mat[(i, j)] + self.mat[(j, i)].conj()) * 0.5
        });
        let (vals, _) = linalg::hermitian_eigen(herm.as_ref())?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, op: &FockOperator) -> C64 {
        linalg::trace((op.matrix() * self.matrix()).as_ref())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            mat: linalg::kron(self.matrix(), other.matrix()),
        }
    }
}

/// Steady state by replacing the first row of `L` with the trace
/// constraint and solving the bordered system, followed by Hermitization
/// and eigenvalue clipping.
pub fn steady_state(liouv: &Liouvillian) -> Result<DensityMatrix> {
    let d = liouv.dim;
    let n = d * d;
    if n <= EIGEN_BUDGET {
        let mut mags: Vec<f64> = linalg::eigenvalues(liouv.matrix())?
            .into_iter()
            .map(|z| z.norm())
            .collect();
        mags.sort_by(f64::total_cmp);
        if mags.len() > 1 && mags[1] < ZERO_MODE_TOL {
            return Err(Error::DegenerateSteadyState(mags[1]));
        }
    }

    let mut bordered = liouv.matrix.clone();
    for col in 0..n {
        bordered[(0, col)] = ZERO;
    }
    for i in 0..d {
        bordered[(0, i + i * d)] = ONE;
    }
    let mut rhs = linalg::zeros(n, 1);
    rhs[(0, 0)] = ONE;
    let x = linalg::solve(bordered.as_ref(), rhs.as_ref())?;
    let raw = unvectorize(x.as_ref(), d);
    let mut rho = Mat::from_fn(d, d, |i, j| (raw[(i, j)] + raw[(j, i)].conj()) * 0.5);

    let (vals, vecs) = linalg::hermitian_eigen(rho.as_ref())?;
    if vals.first().is_some_and(|&v| v < -1e-12) {
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        rho = Mat::from_fn(d, d, |i, j| {
            (0..d)
                .map(|k| vecs[(i, k)] * vecs[(j, k)].conj() * (clipped[k] / total))
                .sum()
        });
    }
    let tr = linalg::trace(rho.as_ref()).re;
    let rho = Mat::from_fn(d, d, |i, j| rho[(i, j)] / tr);

    let residual = linalg::frobenius((&liouv.matrix * vectorize(rho.as_ref())).as_ref());
    if residual > 1e-9 * (1.0 + linalg::max_abs(liouv.matrix())) {
        return Err(Error::SingularSystem(format!(
            "steady-state residual ‖L·ρ‖ = {residual:.3e}"
        )));
    }
    DensityMatrix::new(rho)
}

/// Biorthogonal eigendecomposition of a Liouvillian.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    dim: usize,
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns.
    pub right: CMat,
    /// Left eigenvectors as rows, normalized so that `left · right = I`.
    pub left: CMat,
    /// `‖L − R Λ R⁻¹‖ / ‖L‖`.
    pub reconstruction_error: f64,
    /// False when the reconstruction error exceeds `1e−8`; callers then fall
    /// back to direct solves or the matrix exponential.
    pub diagonalizable: bool,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Index of the eigenvalue closest to zero.
    pub fn zero_mode(&self) -> usize {
        let mut best = 0;
        for (k, z) in self.eigenvalues.iter().enumerate() {
            if z.norm() < self.eigenvalues[best].norm() {
                best = k;
            }
        }
        best
    }

    /// Right eigenvector `k` reshaped to a `d × d` matrix.
    pub fn right_matrix(&self, k: usize) -> CMat {
        let d = self.dim;
        Mat::from_fn(d, d, |i, j| self.right[(i + j * d, k)])
    }

    /// Mode amplitudes `ℓ_k · vec(X)`.
    pub fn project(&self, x: MatRef<'_, C64>) -> Vec<C64> {
        let v = vectorize(x);
        let c = &self.left * &v;
        (0..c.nrows()).map(|k| c[(k, 0)]).collect()
    }

    /// `exp(L t) X` summed over modes.
    pub fn evolve(&self, x: MatRef<'_, C64>, t: f64) -> CMat {
        let coeffs = self.project(x);
        let n = self.dim * self.dim;
        let v = Mat::from_fn(n, 1, |i, _| {
            (0..n)
                .map(|k| self.right[(i, k)] * coeffs[k] * (self.eigenvalues[k] * t).exp())
                .sum()
        });
        unvectorize(v.as_ref(), self.dim)
    }

    /// Weights `w_k` with `Tr(O e^{Lt} X) = Σ_k w_k e^{λ_k t}`.
    pub fn mode_weights(&self, observable: MatRef<'_, C64>, x: MatRef<'_, C64>) -> Vec<C64> {
        let row = trace_functional(observable);
        let coeffs = self.project(x);
        let n = self.dim * self.dim;
        (0..n)
            .map(|k| {
                let overlap: C64 = (0..n).map(|i| row[i] * self.right[(i, k)]).sum();
                overlap * coeffs[k]
            })
            .collect()
    }
}

pub fn eigendecompose(liouv: &Liouvillian) -> Result<SpectralDecomposition> {
    let n = liouv.dim * liouv.dim;
    if n > EIGEN_BUDGET {
        return Err(Error::param(
            "liouvillian",
            format!("dimension {n} exceeds dense eigensolver budget {EIGEN_BUDGET}"),
        ));
    }
    let (eigenvalues, right) = linalg::eigen(liouv.matrix())?;
    let (left, reconstruction_error) = match linalg::inverse(right.as_ref()) {
        Ok(left) => {
            let lam = Mat::from_fn(n, n, |i, j| if i == j { eigenvalues[i] } else { ZERO });
            let rebuilt = &(&right * &lam) * &left;
            let err = linalg::frobenius((&rebuilt - liouv.matrix()).as_ref())
                / linalg::frobenius(liouv.matrix()).max(f64::MIN_POSITIVE);
            (left, err)
        }
        Err(_) => (linalg::zeros(n, n), f64::INFINITY),
    };
    Ok(SpectralDecomposition {
        dim: liouv.dim,
        eigenvalues,
        right,
        left,
        reconstruction_error,
        diagonalizable: reconstruction_error < 1e-8,
    })
}

/// `exp(L t) ρ₀`, by spectral decomposition when well conditioned and by
/// the scaling-and-squaring exponential otherwise.
pub fn propagate(liouv: &Liouvillian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("need t ≥ 0, got {t}")));
    }
    if rho0.dim() != liouv.dim {
        return Err(Error::DimensionMismatch {
            expected: liouv.dim,
            found: rho0.dim(),
        });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let small = liouv.dim * liouv.dim <= EIGEN_BUDGET;
    if small {
        let decomp = eigendecompose(liouv)?;
        if decomp.diagonalizable {
            return propagate_with(&decomp, rho0, t);
        }
    }
    let n = liouv.dim * liouv.dim;
    let scaled = Mat::from_fn(n, n, |i, j| liouv.matrix[(i, j)] * t);
    let v = &linalg::expm(scaled.as_ref()) * vectorize(rho0.matrix());
    DensityMatrix::from_matrix_unchecked(unvectorize(v.as_ref(), liouv.dim))
}

/// Propagation through a decomposition the caller already owns.
pub fn propagate_with(decomp: &SpectralDecomposition, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    DensityMatrix::from_matrix_unchecked(decomp.evolve(rho0.matrix(), t))
}
