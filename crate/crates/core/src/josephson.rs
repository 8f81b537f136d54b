// SPDX-License-Identifier: Apache-2.0

//! The dc-biased Josephson junction as a nonlinear cavity drive.
//!
//! In the frame rotating at the bias frequency the cavity Hamiltonian is
//!
//! ```text
//! H = −Δ n̂ + (E_J*/2) φ₀ [ i â† B̂₁ + h.c. ],   E_J* = E_J exp(−φ₀²/2),
//! B̂₁ = Σ_n L_n^(1)(φ₀²)/(n+1) |n⟩⟨n|,
//! ```
//!
//! so consecutive Fock states are coupled by
//! `T_{n,n+1} = i (E_J*/2) φ₀ L_n^(1)(φ₀²) / √(n+1)`. When `φ₀²` is a root of
//! `L_{N−1}^(1)` the step `|N−1⟩ → |N⟩` is forbidden and the cavity is
//! confined to its lowest `N` Fock states.

use serde::{Deserialize, Serialize};

use crate::hilbert::{self, FockOperator};
use crate::lindblad;
use crate::linalg::{C64, I, ZERO};
use crate::{Error, Result};

/// von Klitzing constant `h/e²` in ohms.
pub const VON_KLITZING_OHM: f64 = 25812.807;

/// Parameters of the driven cavity, in units of `γ` (`ħ = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Number of retained Fock levels `N`.
    pub n_levels: usize,
    /// Detuning `Δ = ω_dc − ω_c`.
    pub detuning: f64,
    /// Bare Josephson energy `E_J`.
    pub ej: f64,
    /// Zero-point phase fluctuation `φ₀`.
    pub phi0: f64,
    /// Cavity decay rate; always 1 in internal units.
    pub gamma: f64,
}

impl CavitySpec {
    /// Arbitrary `φ₀`; the blockade is exact only at a Laguerre root.
    pub fn new(n_levels: usize, detuning: f64, ej: f64, phi0: f64) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::param("n_levels", format!("need N ≥ 2, got {n_levels}")));
        }
        if !(ej >= 0.0) || !ej.is_finite() {
            return Err(Error::param("ej", format!("need E_J ≥ 0, got {ej}")));
        }
        if !(phi0 > 0.0) || !phi0.is_finite() {
            return Err(Error::param("phi0", format!("need φ₀ > 0, got {phi0}")));
        }
        if !detuning.is_finite() {
            return Err(Error::param("detuning", "must be finite"));
        }
        Ok(Self {
            n_levels,
            detuning,
            ej,
            phi0,
            gamma: 1.0,
        })
    }

    /// `φ₀` snapped to the `root_index`-th (ascending) blockade root for `N`
    /// levels.
    pub fn blockaded(n_levels: usize, root_index: usize, detuning: f64, ej: f64) -> Result<Self> {
        let roots = blockade_roots(n_levels)?;
        let root = roots.get(root_index).ok_or_else(|| {
            Error::param(
                "root_index",
                format!("N = {n_levels} has {} roots, index {root_index} requested", roots.len()),
            )
        })?;
        Self::new(n_levels, detuning, ej, root.phi0_sq.sqrt())
    }

    pub fn phi0_sq(&self) -> f64 {
        self.phi0 * self.phi0
    }

    pub fn ej_star(&self) -> f64 {
        ej_star(self.ej, self.phi0)
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn with_ej(mut self, ej: f64) -> Self {
        self.ej = ej;
        self
    }
}

/// A value of `φ₀²` that blocks the Fock transition `|N−1⟩ → |N⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockadeRoot {
    pub n_level: usize,
    pub phi0_sq: f64,
    pub blocked_transition: (usize, usize),
}

/// Associated Laguerre polynomial `L_n^(1)(x)` by upward recurrence.
pub fn laguerre1(n: usize, x: f64) -> f64 {
    laguerre1_pair(n, x).0
}

/// `(L_n^(1)(x), L_{n−1}^(1)(x))`, with `L_{−1} = 0`.
fn laguerre1_pair(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for k in 0..n {
        // (k+1) L_{k+1} = (2k + 2 − x) L_k − (k + 1) L_{k−1}
        let kf = k as f64;
        let next = ((2.0 * kf + 2.0 - x) * cur - (kf + 1.0) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

/// `d/dx L_n^(1)(x)` from `x L_n' = n L_n − (n+1) L_{n−1}`; valid for `x > 0`.
fn laguerre1_derivative(n: usize, x: f64) -> f64 {
    let (ln, lnm1) = laguerre1_pair(n, x);
    (n as f64 * ln - (n as f64 + 1.0) * lnm1) / x
}

/// All `N − 1` blockade values of `φ₀²` for an `N`-level cavity, ascending.
///
/// Roots of `L_{N−1}^(1)` are bracketed by sign changes on a uniform grid
/// over `(0, 4N + 8]`, bisected to machine precision and finished with one
/// Newton step.
pub fn blockade_roots(n_levels: usize) -> Result<Vec<BlockadeRoot>> {
    if n_levels < 2 {
        return Err(Error::param("n_levels", format!("need N ≥ 2, got {n_levels}")));
    }
    let degree = n_levels - 1;
    let upper = 4.0 * n_levels as f64 + 8.0;
    let samples = 4000 * n_levels;
    let step = upper / samples as f64;
    let f = |x: f64| laguerre1(degree, x);

    let mut roots = Vec::with_capacity(degree);
    let mut lo = step * 1e-3;
    let mut flo = f(lo);
    for k in 1..=samples {
        let hi = k as f64 * step;
        let fhi = f(hi);
        if fhi == 0.0 {
            roots.push(hi);
        } else if flo * fhi < 0.0 {
            roots.push(polish_root(degree, lo, hi, flo));
        }
        lo = hi;
        flo = fhi;
    }
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if roots.len() != degree {
        return Err(Error::InvalidParameter {
            name: "n_levels",
            reason: format!(
                "found {} roots of L_{degree}^(1), expected {degree}",
                roots.len()
            ),
        });
    }
    Ok(roots
        .into_iter()
        .map(|phi0_sq| BlockadeRoot {
            n_level: n_levels,
            phi0_sq,
            blocked_transition: (n_levels - 1, n_levels),
        })
        .collect())
}

fn polish_root(degree: usize, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fmid = laguerre1(degree, mid);
        if fmid == 0.0 {
            return mid;
        }
        if flo * fmid < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    let x = 0.5 * (lo + hi);
    let newton = x - laguerre1(degree, x) / laguerre1_derivative(degree, x);
    if newton.is_finite() && laguerre1(degree, newton).abs() <= laguerre1(degree, x).abs() {
        newton
    } else {
        x
    }
}

/// Effective drive `E_J* = E_J exp(−φ₀²/2)`.
pub fn ej_star(ej: f64, phi0: f64) -> f64 {
    ej * (-phi0 * phi0 / 2.0).exp()
}

/// Diagonal nonlinearity `B̂₁ = Σ_n L_n^(1)(φ₀²)/(n+1) |n⟩⟨n|`.
pub fn b1_operator(d: usize, phi0: f64) -> Result<FockOperator> {
    let x = phi0 * phi0;
    let entries: Vec<C64> = (0..d)
        .map(|n| C64::from(laguerre1(n, x) / (n as f64 + 1.0)))
        .collect();
    FockOperator::diagonal(&entries)
}

/// `T_{n,n+1} = ⟨n+1|H|n⟩ = i (E_J*/2) φ₀ L_n^(1)(φ₀²)/√(n+1)`.
pub fn transition_element(n: usize, spec: &CavitySpec) -> C64 {
    let magnitude = 0.5 * spec.ej_star() * spec.phi0 * laguerre1(n, spec.phi0_sq())
        / ((n + 1) as f64).sqrt();
    I * magnitude
}

/// The `N`-level rotating-frame Hamiltonian: diagonal `−Δ n`, with
/// `T_{n,n+1}` below the diagonal and its conjugate above.
pub fn build_hcav(spec: &CavitySpec) -> FockOperator {
    let n = spec.n_levels;
    let t: Vec<C64> = (0..n.saturating_sub(1))
        .map(|k| transition_element(k, spec))
        .collect();
    FockOperator::from_fn(n, |i, j| {
        if i == j {
            C64::from(-spec.detuning * i as f64)
        } else if i == j + 1 {
            t[j]
        } else if j == i + 1 {
            t[i].conj()
        } else {
            ZERO
        }
    })
    .expect("CavitySpec guarantees N ≥ 2")
}

/// The rotating-frame Hamiltonian on `d` Fock levels without blockade
/// truncation, assembled from operators: `−Δ n̂ + (E_J*/2) φ₀ [i â† B̂₁ + h.c.]`.
pub fn build_hcav_untruncated(spec: &CavitySpec, d: usize) -> Result<FockOperator> {
    let n = hilbert::number(d)?;
    let adag = hilbert::creation(d)?;
    let b1 = b1_operator(d, spec.phi0)?;
    let drive = (&adag * &b1).scale(I * (0.5 * spec.ej_star() * spec.phi0));
    let drive = &drive + &drive.dagger();
    Ok(&n.scale(C64::from(-spec.detuning)) + &drive)
}

/// `φ₀ = √(4π Z_R / R_K)` for resonator impedance `Z_R` in ohms.
pub fn impedance_to_phi0(z_ohm: f64) -> Result<f64> {
    if !(z_ohm > 0.0) || !z_ohm.is_finite() {
        return Err(Error::param("z_ratio", format!("impedance must be positive, got {z_ohm}")));
    }
    Ok((4.0 * std::f64::consts::PI * z_ohm / VON_KLITZING_OHM).sqrt())
}

/// Steady-state population found above the blockade, in Fock states `≥ N`,
/// when the untruncated Hamiltonian is simulated on `N + extra_dims` levels.
pub fn blockade_leakage(spec: &CavitySpec, extra_dims: usize) -> Result<f64> {
    if extra_dims < 1 {
        return Err(Error::param("extra_dims", "need at least one level above the blockade"));
    }
    let d = spec.n_levels + extra_dims;
    let h = build_hcav_untruncated(spec, d)?;
    let a = hilbert::annihilation(d)?;
    let liouv = lindblad::build_liouvillian(&h, &[(a, spec.gamma)])?;
    let rho = lindblad::steady_state(&liouv)?;
    Ok((spec.n_levels..d).map(|k| rho.get(k, k).re).sum::<f64>().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    #[test]
    fn laguerre_low_orders() {
        for x in [0.0, 0.3, 2.0, 9.5] {
            assert_eq!(laguerre1(0, x), 1.0);
            assert!((laguerre1(1, x) - (2.0 - x)).abs() < 1e-15);
            let l2 = 0.5 * x * x - 3.0 * x + 3.0;
            assert!((laguerre1(2, x) - l2).abs() < 1e-13);
        }
        assert_eq!(laguerre1(1, 2.0), 0.0);
        assert!(laguerre1(2, 3.0 - SQRT3).abs() < 1e-14);
        assert!(laguerre1(2, 3.0 + SQRT3).abs() < 1e-14);
    }

    #[test]
    fn laguerre_at_origin_is_n_plus_one() {
        for n in 0..40 {
            assert!((laguerre1(n, 0.0) - (n + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for n in 1..8 {
            for x in [0.4, 1.7, 5.2] {
                let h = 1e-6;
                let fd = (laguerre1(n, x + h) - laguerre1(n, x - h)) / (2.0 * h);
                assert!((laguerre1_derivative(n, x) - fd).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn roots_of_small_levels() {
        let r2 = blockade_roots(2).unwrap();
        assert_eq!(r2.len(), 1);
        assert!((r2[0].phi0_sq - 2.0).abs() < 1e-14);
        assert_eq!(r2[0].blocked_transition, (1, 2));

        let r3 = blockade_roots(3).unwrap();
        assert!((r3[0].phi0_sq - (3.0 - SQRT3)).abs() < 1e-13);
        assert!((r3[1].phi0_sq - (3.0 + SQRT3)).abs() < 1e-13);
    }

    #[test]
    fn roots_are_polished_and_counted() {
        for n in 2..=12 {
            let roots = blockade_roots(n).unwrap();
            assert_eq!(roots.len(), n - 1);
            for w in roots.windows(2) {
                assert!(w[0].phi0_sq < w[1].phi0_sq);
            }
            if n <= 6 {
                for r in &roots {
                    assert!(laguerre1(n - 1, r.phi0_sq).abs() < 1e-12, "N={n} x={}", r.phi0_sq);
                }
            }
        }
        assert!(blockade_roots(1).is_err());
    }

    #[test]
    fn ej_star_values() {
        assert!((ej_star(80.0, 2f64.sqrt()) - 80.0 / std::f64::consts::E).abs() < 1e-12);
        assert!((ej_star(3.5, 1e-9) - 3.5).abs() < 1e-12);
        let phi0 = (3.0 - SQRT3).sqrt();
        let want = 300.0 * (-(3.0 - SQRT3) / 2.0).exp();
        assert!((ej_star(300.0, phi0) - want).abs() < 1e-12);
        assert!((want - 159.15).abs() < 0.01);
    }

    #[test]
    fn b1_limits() {
        let b = b1_operator(6, 1e-7).unwrap();
        for n in 0..6 {
            assert!((b.get(n, n) - C64::from(1.0)).norm() < 1e-12);
        }
        let b = b1_operator(4, 2f64.sqrt()).unwrap();
        assert!(b.get(1, 1).norm() < 1e-15);
        // 1 − nφ₀²/2 for n = 1, φ₀² = 0.01
        let b = b1_operator(3, 0.1).unwrap();
        assert!((b.get(1, 1).re - (1.0 - 0.005)).abs() < 1e-4);
    }

    #[test]
    fn transition_elements_at_named_points() {
        let two = CavitySpec::blockaded(2, 0, 0.0, 80.0).unwrap();
        assert!(transition_element(1, &two).norm() < 1e-13);
        let t01 = transition_element(0, &two);
        assert!((t01 - I * two.ej_star() / 2f64.sqrt()).norm() < 1e-12);

        let three = CavitySpec::blockaded(3, 0, 0.0, 300.0).unwrap();
        let es = three.ej_star();
        let p = three.phi0;
        assert!((transition_element(0, &three) - I * es * p / 2.0).norm() < 1e-11);
        let t12 = I * es * (p * (2.0 - p * p)) / (2.0 * 2f64.sqrt());
        assert!((transition_element(1, &three) - t12).norm() < 1e-11);
        assert!(transition_element(2, &three).norm() < 1e-11);
    }

    #[test]
    fn transition_element_small_phi0_is_linear_drive() {
        let spec = CavitySpec::new(4, 0.0, 10.0, 1e-4).unwrap();
        for n in 0..3 {
            let linear = I * 0.5 * spec.ej * spec.phi0 * ((n + 1) as f64).sqrt();
            assert!((transition_element(n, &spec) - linear).norm() < 1e-7 * linear.norm());
        }
    }

    #[test]
    fn hcav_shapes() {
        let spec = CavitySpec::blockaded(2, 0, 0.0, 80.0).unwrap();
        let h = build_hcav(&spec);
        let t01 = transition_element(0, &spec);
        assert_eq!(h.get(1, 0), t01);
        assert_eq!(h.get(0, 1), t01.conj());
        assert_eq!(h.get(0, 0), ZERO);
        assert_eq!(h.get(1, 1), ZERO);

        let undriven = CavitySpec::blockaded(3, 0, 1.5, 0.0).unwrap();
        let h = build_hcav(&undriven);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { -1.5 * i as f64 } else { 0.0 };
                assert!((h.get(i, j) - C64::from(want)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn hcav_is_hermitian_and_matches_operator_route() {
        let spec = CavitySpec::blockaded(4, 1, -12.0, 250.0).unwrap();
        let h = build_hcav(&spec);
        assert!(h.hermiticity_defect() < 1e-15);
        let full = build_hcav_untruncated(&spec, 4).unwrap();
        assert!(h.max_abs_diff(&full) < 1e-10);
    }

    #[test]
    fn franck_condon_identity() {
        for phi0_sq in [2.0, 3.0 - SQRT3, 3.31] {
            let spec = CavitySpec::new(4, 0.0, 80.0, f64::sqrt(phi0_sq)).unwrap();
            let d = hilbert::displacement(C64::new(0.0, spec.phi0), 30).unwrap();
            for n in 0..4 {
                let fc = d.get(n + 1, n) * (spec.ej / 2.0);
                let t = transition_element(n, &spec);
                let scale = t.norm().max(1e-12 * spec.ej);
                assert!((fc - t).norm() < 1e-8 * scale.max(1.0), "φ₀²={phi0_sq} n={n}");
            }
        }
    }

    #[test]
    fn impedance_conversion() {
        let rk = VON_KLITZING_OHM;
        let pi = std::f64::consts::PI;
        assert!((impedance_to_phi0(rk / (4.0 * pi)).unwrap() - 1.0).abs() < 1e-14);
        assert!((impedance_to_phi0(rk / (2.0 * pi)).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let phi0 = impedance_to_phi0(4107.5).unwrap();
        assert!((phi0 * phi0 - 2.0).abs() / 2.0 < 1e-3);
        assert!(impedance_to_phi0(0.0).is_err());
        assert!(impedance_to_phi0(-5.0).is_err());
    }

    #[test]
    fn leakage_exact_and_perturbed() {
        let spec = CavitySpec::blockaded(3, 0, -10.0, 120.0).unwrap();
        assert!(blockade_leakage(&spec, 3).unwrap() < 1e-10);
        let off = CavitySpec::new(3, -10.0, 120.0, (spec.phi0_sq() + 0.05).sqrt()).unwrap();
        assert!(blockade_leakage(&off, 3).unwrap() > 0.0);
        let idle = CavitySpec::blockaded(3, 0, -10.0, 0.0).unwrap();
        assert_eq!(blockade_leakage(&idle, 2).unwrap(), 0.0);
        assert!(blockade_leakage(&spec, 0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(CavitySpec::new(1, 0.0, 1.0, 1.0).is_err());
        assert!(CavitySpec::new(2, 0.0, -1.0, 1.0).is_err());
        assert!(CavitySpec::new(2, 0.0, 1.0, 0.0).is_err());
        assert!(CavitySpec::blockaded(3, 2, 0.0, 1.0).is_err());
    }
}
