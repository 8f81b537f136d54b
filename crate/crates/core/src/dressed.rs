// SPDX-License-Identifier: Apache-2.0

//! Dressed states of the driven cavity and the ingredients of the secular
//! theory built on them.
//!
//! Notation: `X_αβ = ⟨α|X̂|β⟩` in the dressed basis, energies ascending,
//! `ω_βα = ε_β − ε_α`. Rows of a [`TransitionTable`] always have `α < β`,
//! so `ω_βα > 0` and `α` is the lower state.

use faer::{Mat, MatRef};
use serde::Serialize;

use crate::hilbert::{self, FockOperator};
use crate::lindblad::DensityMatrix;
use crate::linalg::{self, CMat, C64, ONE};
use crate::{Error, Result};

/// Default frequency separation (in units of `γ`) below which two
/// transitions are treated as quasi-degenerate.
pub const DEFAULT_CLUSTER_THRESHOLD: f64 = 1.0;

const DEGENERACY_GAP: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DressedBasis {
    /// `ε_α`, ascending.
    pub energies: Vec<f64>,
    /// Columns are the dressed states in the Fock basis.
    pub transform: CMat,
    /// `a_αβ`.
    pub a_dressed: CMat,
    /// `n_αβ`.
    pub n_dressed: CMat,
    /// Set when two energies are closer than `1e−10`; matrix elements
    /// inside such a block depend on the eigensolver's choice of basis.
    pub degenerate: bool,
}

impl DressedBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `ε_β − ε_α`.
    pub fn omega(&self, alpha: usize, beta: usize) -> f64 {
        self.energies[beta] - self.energies[alpha]
    }

    /// `U† X U` for an operator given in the Fock basis.
    pub fn to_dressed(&self, x: MatRef<'_, C64>) -> CMat {
        let u = self.transform.as_ref();
        u.adjoint() * x * u
    }

    /// Smallest separation between distinct transition frequencies.
    pub fn min_transition_gap(&self) -> f64 {
        let d = self.dim();
        let mut freqs = Vec::new();
        for a in 0..d {
            for b in a + 1..d {
                freqs.push(self.omega(a, b));
            }
        }
        freqs.sort_by(f64::total_cmp);
        let mut gap = freqs.first().copied().unwrap_or(f64::INFINITY);
        for w in freqs.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
        gap
    }
}

/// Diagonalizes a Hermitian cavity Hamiltonian.
///
/// Each eigenvector is rotated so that its largest-magnitude Fock component
/// is real and positive (lowest index wins ties), which makes the dressed
/// matrix elements reproducible.
pub fn diagonalize(h: &FockOperator) -> Result<DressedBasis> {
    let herm = h.hermiticity_defect();
    if herm > 1e-10 {
        return Err(Error::NotHermitian(herm));
    }
    let d = h.dim();
    let (energies, mut u) = linalg::hermitian_eigen(h.matrix())?;
    fix_phases(&mut u);
    let degenerate = energies.windows(2).any(|w| w[1] - w[0] < DEGENERACY_GAP);

    let a = hilbert::annihilation(d)?;
    let n = hilbert::number(d)?;
    let a_dressed = u.adjoint() * a.matrix() * &u;
    let n_dressed = u.adjoint() * n.matrix() * &u;
    Ok(DressedBasis {
        energies,
        transform: u,
        a_dressed,
        n_dressed,
        degenerate,
    })
}

fn fix_phases(u: &mut CMat) {
    let d = u.nrows();
    for col in 0..u.ncols() {
        let scale = (0..d).map(|i| u[(i, col)].norm()).fold(0.0, f64::max);
        let pivot = (0..d)
            .find(|&i| u[(i, col)].norm() >= scale * (1.0 - 1e-12))
            .unwrap_or(0);
        let z = u[(pivot, col)];
        let phase = z.conj() / z.norm();
        for i in 0..d {
            u[(i, col)] *= phase;
        }
        u[(pivot, col)] = C64::from(u[(pivot, col)].re);
    }
}

/// `P_α = (U† ρ U)_αα`.
pub fn populations(basis: &DressedBasis, rho: &DensityMatrix) -> Result<Vec<f64>> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: rho.dim(),
        });
    }
    let r = basis.to_dressed(rho.matrix());
    Ok((0..basis.dim()).map(|k| r[(k, k)].re).collect())
}

/// `½(n_αα + n_ββ) − a_αα a*_ββ` in units of `γ`.
fn complex_width(basis: &DressedBasis, alpha: usize, beta: usize) -> C64 {
    let a = &basis.a_dressed;
    let n = &basis.n_dressed;
    (n[(alpha, alpha)] + n[(beta, beta)]) * 0.5 - a[(alpha, alpha)] * a[(beta, beta)].conj()
}

/// Secular decay rate `γ̃_αβ` of the coherence `(ρ)_αβ`, real part.
pub fn effective_width(basis: &DressedBasis, alpha: usize, beta: usize) -> f64 {
    complex_width(basis, alpha, beta).re
}

/// Imaginary part of the complex secular rate. A nonzero value would pull
/// the line center by this amount; it vanishes for real Hamiltonians.
pub fn width_shift(basis: &DressedBasis, alpha: usize, beta: usize) -> f64 {
    complex_width(basis, alpha, beta).im
}

/// Population rate matrix `A_αβ = |a_αβ|² − n_αα δ_αβ` (units of `γ`).
#[derive(Clone, Debug)]
pub struct RateMatrix {
    mat: Mat<f64>,
}

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn to_complex(&self) -> CMat {
        let d = self.dim();
        linalg::from_real(d, d, |i, j| self.mat[(i, j)])
    }

    /// Largest `|Σ_α A_αβ|` over columns.
    pub fn column_sum_defect(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|j| (0..d).map(|i| self.mat[(i, j)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(self.to_complex().as_ref())
    }

    /// Normalized null vector: the secular steady-state populations.
    pub fn stationary(&self) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut m = self.to_complex();
        for j in 0..d {
            m[(0, j)] = ONE;
        }
        let mut rhs = linalg::zeros(d, 1);
        rhs[(0, 0)] = ONE;
        let x = linalg::solve(m.as_ref(), rhs.as_ref())?;
        Ok((0..d).map(|i| x[(i, 0)].re).collect())
    }
}

pub fn rate_matrix(basis: &DressedBasis) -> RateMatrix {
    let d = basis.dim();
    let a = &basis.a_dressed;
    let n = &basis.n_dressed;
    RateMatrix {
        mat: Mat::from_fn(d, d, |i, j| {
            let jump = a[(i, j)].norm_sqr();
            if i == j {
                jump - n[(i, i)].re
            } else {
                jump
            }
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transition {
    /// Lower dressed state.
    pub alpha: usize,
    /// Upper dressed state.
    pub beta: usize,
    /// `ω_βα > 0`.
    pub omega: f64,
    /// `γ̃_αβ`.
    pub width: f64,
    /// Imaginary part of the complex secular rate.
    pub width_shift: f64,
    /// `|n_αβ|²`.
    pub n_sq: f64,
    pub pop_low: f64,
    pub pop_high: f64,
    /// Index into [`TransitionTable::clusters`].
    pub cluster: usize,
}

impl Transition {
    pub fn imbalance(&self) -> f64 {
        self.pop_low - self.pop_high
    }

    pub fn label(&self) -> String {
        format!("{}_{}", self.beta, self.alpha)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitionTable {
    /// Ordered by `(alpha, beta)`.
    pub rows: Vec<Transition>,
    pub populations: Vec<f64>,
    /// Partition of row indices; each group sorted by frequency.
    pub clusters: Vec<Vec<usize>>,
    pub cluster_threshold: f64,
}

impl TransitionTable {
    pub fn find(&self, alpha: usize, beta: usize) -> Option<&Transition> {
        self.rows.iter().find(|r| r.alpha == alpha && r.beta == beta)
    }

    pub fn has_clusters(&self) -> bool {
        self.clusters.iter().any(|c| c.len() > 1)
    }

    /// Largest transition frequency.
    pub fn omega_max(&self) -> f64 {
        self.rows.iter().map(|r| r.omega).fold(0.0, f64::max)
    }
}

pub fn transition_table(basis: &DressedBasis, rho: &DensityMatrix) -> Result<TransitionTable> {
    transition_table_with_threshold(basis, rho, DEFAULT_CLUSTER_THRESHOLD)
}

pub fn transition_table_with_threshold(
    basis: &DressedBasis,
    rho: &DensityMatrix,
    threshold: f64,
) -> Result<TransitionTable> {
    let pops = populations(basis, rho)?;
    let d = basis.dim();
    let mut rows = Vec::with_capacity(d * (d - 1) / 2);
    for alpha in 0..d {
        for beta in alpha + 1..d {
            rows.push(Transition {
                alpha,
                beta,
                omega: basis.omega(alpha, beta),
                width: effective_width(basis, alpha, beta),
                width_shift: width_shift(basis, alpha, beta),
                n_sq: basis.n_dressed[(alpha, beta)].norm_sqr(),
                pop_low: pops[alpha],
                pop_high: pops[beta],
                cluster: 0,
            });
        }
    }
    let clusters = cluster_transitions(&rows, threshold)?;
    for (c, members) in clusters.iter().enumerate() {
        for &m in members {
            rows[m].cluster = c;
        }
    }
    Ok(TransitionTable {
        rows,
        populations: pops,
        clusters,
        cluster_threshold: threshold,
    })
}

/// Groups rows whose frequencies are linked by steps smaller than
/// `threshold` (transitive closure). Clusters are ordered by their lowest
/// frequency.
pub fn cluster_transitions(rows: &[Transition], threshold: f64) -> Result<Vec<Vec<usize>>> {
    if !(threshold > 0.0) {
        return Err(Error::param("cluster_threshold", format!("must be > 0, got {threshold}")));
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| rows[i].omega.total_cmp(&rows[j].omega).then(i.cmp(&j)));
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in order {
        let w = rows[i].omega;
        match clusters.last_mut() {
            Some(current) if w - last < threshold => current.push(i),
            _ => clusters.push(vec![i]),
        }
        last = w;
    }
    Ok(clusters)
}
