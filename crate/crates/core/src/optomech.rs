// SPDX-License-Identifier: Apache-2.0

//! Optomechanical damping, residual occupancy and steady phonon number.
//!
//! `Γ_opt = g₀² [S_nn(ω_m) − S_nn(−ω_m)]`; positive values cool the
//! mechanical mode. In the resolved regime this becomes a sum over
//! dressed transitions `Σ (P_α − P_β) Γ_αβ(ω_m)` with Lorentzian
//! single-transition rates.

use serde::{Deserialize, Serialize};

use crate::dressed::{Transition, TransitionTable};
use crate::hilbert::{self, FockOperator};
use crate::josephson::{build_hcav, CavitySpec};
use crate::lindblad::{self, DensityMatrix};
use crate::linalg::C64;
use crate::spectrum::{Method, SpectralModel, SpectrumResult};
use crate::{Error, Result};

/// Mechanical mode parameters in units of `γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanicalParams {
    pub g0: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    #[serde(default)]
    pub n_th: f64,
}

impl MechanicalParams {
    pub fn new(g0: f64, omega_m: f64, gamma_m: f64, n_th: f64) -> Result<Self> {
        let m = Self {
            g0,
            omega_m,
            gamma_m,
            n_th,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g0.is_finite() || self.g0 < 0.0 {
            return Err(Error::param("g0", format!("need g0 ≥ 0, got {}", self.g0)));
        }
        if !self.omega_m.is_finite() {
            return Err(Error::param("omega_m", "must be finite"));
        }
        if !(self.gamma_m >= 0.0) || !self.gamma_m.is_finite() {
            return Err(Error::param("gamma_m", format!("need γ_m ≥ 0, got {}", self.gamma_m)));
        }
        if !(self.n_th >= 0.0) || !self.n_th.is_finite() {
            return Err(Error::param("n_th", format!("need n_th ≥ 0, got {}", self.n_th)));
        }
        Ok(())
    }

    pub fn with_omega_m(mut self, omega_m: f64) -> Self {
        self.omega_m = omega_m;
        self
    }

    /// Scope warnings for the weak-coupling, sideband-resolved theory.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.g0 > 0.1 {
            out.push(format!("g0 = {} exceeds 0.1γ; weak-coupling theory may not apply", self.g0));
        }
        if self.gamma_m >= self.omega_m.abs() {
            out.push(format!(
                "gamma_m = {} is not small compared with omega_m = {}",
                self.gamma_m, self.omega_m
            ));
        }
        out
    }
}

/// One term of the transition sum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionRate {
    pub alpha: usize,
    pub beta: usize,
    /// `Γ_αβ(ω_m)`.
    pub rate: f64,
    /// `P_α − P_β`.
    pub imbalance: f64,
    /// `(P_α − P_β) Γ_αβ(ω_m)`.
    pub contribution: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptomechResult {
    pub method: Method,
    pub omega_m: f64,
    pub gamma_opt: f64,
    pub per_transition: Vec<TransitionRate>,
    /// Present only when `ω_m` sits on a non-inverted transition.
    pub n_residual: Option<f64>,
    pub n_steady: Option<f64>,
}

/// Lorentzian single-transition rate
/// `Γ_αβ(ω_m) = g₀² |n_αβ|² 2γ̃ / ((ω_βα − ω_m)² + γ̃²)`.
pub fn single_transition_rate(row: &Transition, mech: &MechanicalParams) -> f64 {
    let g = row.width;
    let detune = row.omega - mech.omega_m;
    mech.g0 * mech.g0 * row.n_sq * 2.0 * g / (detune * detune + g * g)
}

/// Secular `Γ_opt` as the signed transition sum, with `n̄^r` and `n̄_m` when
/// `ω_m` is within three linewidths of a transition.
pub fn gamma_opt_secular(table: &TransitionTable, mech: &MechanicalParams) -> OptomechResult {
    gamma_opt_secular_signed(table, mech, 1.0)
}

/// [`gamma_opt_secular`] with every transition rate multiplied by `sign`.
/// Only meaningful as a deliberately broken variant for mutation checks.
#[doc(hidden)]
pub fn gamma_opt_secular_signed(table: &TransitionTable, mech: &MechanicalParams, sign: f64) -> OptomechResult {
    let per_transition: Vec<TransitionRate> = table
        .rows
        .iter()
        .map(|r| {
            let rate = sign * single_transition_rate(r, mech);
            TransitionRate {
                alpha: r.alpha,
                beta: r.beta,
                rate,
                imbalance: r.imbalance(),
                contribution: r.imbalance() * rate,
            }
        })
        .collect();
    let gamma_opt = per_transition.iter().map(|t| t.contribution).sum();
    let n_residual = resonant_row(table, mech.omega_m, 3.0)
        .and_then(|r| n_residual(table, (r.alpha, r.beta)).ok());
    let n_steady = n_residual.and_then(|nr| n_steady(gamma_opt, nr, mech).ok());
    OptomechResult {
        method: Method::Secular,
        omega_m: mech.omega_m,
        gamma_opt,
        per_transition,
        n_residual,
        n_steady,
    }
}

/// The transition closest to `omega`, if within `widths` linewidths.
pub fn resonant_row(table: &TransitionTable, omega: f64, widths: f64) -> Option<&Transition> {
    table
        .rows
        .iter()
        .filter(|r| (r.omega - omega).abs() <= widths * r.width)
        .min_by(|a, b| (a.omega - omega).abs().total_cmp(&(b.omega - omega).abs()))
}

/// `g₀² [S(ω_m) − S(−ω_m)]` from sampled values, with four-point cubic
/// interpolation between grid points.
pub fn gamma_opt_from_spectrum(spectrum: &SpectrumResult, mech: &MechanicalParams) -> Result<f64> {
    let plus = interpolate(&spectrum.omegas, &spectrum.values, mech.omega_m)?;
    let minus = interpolate(&spectrum.omegas, &spectrum.values, -mech.omega_m)?;
    Ok(mech.g0 * mech.g0 * (plus - minus))
}

/// `g₀² [S(ω_m) − S(−ω_m)]` evaluated directly on a spectral model.
pub fn gamma_opt_from_model(model: &SpectralModel, mech: &MechanicalParams) -> Result<f64> {
    Ok(mech.g0 * mech.g0 * (model.eval(mech.omega_m)? - model.eval(-mech.omega_m)?))
}

/// Lagrange cubic through the four samples surrounding `x` (fewer near the
/// ends). Grid points are returned exactly.
pub fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    let n = xs.len();
    if n == 0 || ys.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: ys.len(),
        });
    }
    let (min, max) = (xs[0], xs[n - 1]);
    if !(x >= min && x <= max) {
        return Err(Error::OutsideGrid { omega: x, min, max });
    }
    let hi = xs.partition_point(|&v| v < x);
    if hi < n && xs[hi] == x {
        return Ok(ys[hi]);
    }
    let lo = hi.saturating_sub(2);
    let end = (lo + 4).min(n);
    let lo = end.saturating_sub(4);
    let mut acc = 0.0;
    for i in lo..end {
        let mut w = 1.0;
        for j in lo..end {
            if i != j {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * ys[i];
    }
    Ok(acc)
}

/// `n̄^r ≃ P_β / (P_α − P_β)` at `ω_m ≃ ω_βα`.
pub fn n_residual(table: &TransitionTable, transition: (usize, usize)) -> Result<f64> {
    let (alpha, beta) = transition;
    let row = table.find(alpha, beta).ok_or_else(|| {
        Error::param("transition", format!("no transition ({alpha}, {beta}) with ε_α < ε_β"))
    })?;
    if row.pop_low <= row.pop_high {
        return Err(Error::InversionAtTransition {
            alpha,
            beta,
            p_low: row.pop_low,
            p_high: row.pop_high,
        });
    }
    Ok(row.pop_high / (row.pop_low - row.pop_high))
}

/// Residual occupancy at an arbitrary `ω_m`, defined only on resonance.
pub fn n_residual_at(table: &TransitionTable, omega_m: f64) -> Result<f64> {
    let row = resonant_row(table, omega_m, 3.0).ok_or_else(|| {
        Error::Unsupported(format!(
            "residual occupancy is defined only near a transition; ω_m = {omega_m} is off resonance"
        ))
    })?;
    n_residual(table, (row.alpha, row.beta))
}

/// `n̄_m = (Γ_opt n̄^r + γ_m n̄_th) / (Γ_opt + γ_m)`.
pub fn n_steady(gamma_opt: f64, n_residual: f64, mech: &MechanicalParams) -> Result<f64> {
    let total = gamma_opt + mech.gamma_m;
    if !(total > 0.0) {
        return Err(Error::NetInstability(total));
    }
    Ok((gamma_opt * n_residual + mech.gamma_m * mech.n_th) / total)
}

/// Diagnostics of the coupled cavity-plus-mechanics oracle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleOutcome {
    /// Fitted decay rate minus `γ_m`.
    pub gamma_opt: f64,
    pub fitted_rate: f64,
    /// Long-time phonon number (stationary weight).
    pub n_infinity: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub mech_dim: usize,
}

/// Oracle start time: fast cavity transients are discarded before it.
pub const ORACLE_T0: f64 = 3.0;
const ORACLE_FLOOR: f64 = 1e-6;
const ORACLE_SAMPLES: usize = 400;
const ORACLE_INITIAL_PHONONS: usize = 2;

/// `Γ_opt` from the ring-down of the full bipartite model.
///
/// `H = H_cav ⊗ 1 + ω_m 1 ⊗ b†b + g₀ n̂ ⊗ (b + b†)` with cavity decay at `γ`
/// and mechanical decay at `γ_m`. Starting from `ρ_ss^cav ⊗ |2⟩⟨2|`, the
/// phonon number relaxes as `n_∞ + c e^{−(γ_m + Γ_opt) t}` once the fast
/// cavity transients have died out; a straight-line fit to
/// `log|⟨b†b⟩ − n_∞|` over `t ∈ [3, t_end]`, with `t_end` where the signal
/// falls below `1e−6`, gives the rate.
pub fn gamma_opt_full_oracle(spec: &CavitySpec, mech: &MechanicalParams, mech_dim: usize) -> Result<OracleOutcome> {
    mech.validate()?;
    if mech_dim < 6 {
        return Err(Error::param("mech_dim", format!("need mech_dim ≥ 6, got {mech_dim}")));
    }
    let n = spec.n_levels;
    let total = n * mech_dim;
    if total * total > lindblad::EIGEN_BUDGET {
        return Err(Error::param(
            "mech_dim",
            format!("coupled dimension ({total})² exceeds the dense budget {}", lindblad::EIGEN_BUDGET),
        ));
    }
    if mech.g0 > 0.05 {
        return Err(Error::param("g0", format!("oracle protocol needs g0 ≤ 0.05, got {}", mech.g0)));
    }
    if !(mech.gamma_m > 0.0 && mech.gamma_m <= 0.02) {
        return Err(Error::param("gamma_m", format!("oracle protocol needs 0 < γ_m ≤ 0.02, got {}", mech.gamma_m)));
    }
    if mech.n_th != 0.0 {
        return Err(Error::param("n_th", "oracle protocol needs n_th = 0"));
    }

    let hc = build_hcav(spec);
    let a = hilbert::annihilation(n)?;
    let nc = hilbert::number(n)?;
    let b = hilbert::annihilation(mech_dim)?;
    let bdb = hilbert::number(mech_dim)?;
    let ic = FockOperator::identity(n)?;
    let im = FockOperator::identity(mech_dim)?;

    let x = &b + &b.dagger();
    let h = &(&hc.kron(&im) + &ic.kron(&bdb).scale(C64::from(mech.omega_m))) + &nc.kron(&x).scale(C64::from(mech.g0));
    let liouv = lindblad::build_liouvillian(&h, &[(a.kron(&im), spec.gamma), (ic.kron(&b), mech.gamma_m)])?;

    let cav = lindblad::build_liouvillian(&hc, &[(a, spec.gamma)])?;
    let rho_c = lindblad::steady_state(&cav)?;
    let rho0 = rho_c.kron(&DensityMatrix::fock(mech_dim, ORACLE_INITIAL_PHONONS)?);
    let observable = ic.kron(&bdb);

    let dec = lindblad::eigendecompose(&liouv)?;
    if !dec.diagonalizable {
        return Err(Error::Eigen(format!(
            "coupled Liouvillian reconstruction error {:.3e}",
            dec.reconstruction_error
        )));
    }
    let weights = dec.mode_weights(observable.matrix(), rho0.matrix());
    let n_infinity = weights[dec.zero_mode()].re;
    let signal = |t: f64| -> f64 {
        weights
            .iter()
            .zip(&dec.eigenvalues)
            .map(|(w, l)| (w * (l * t).exp()).re)
            .sum()
    };

    // Scan forward until the excess phonon number drops below the floor.
    let step = 0.25 / mech.gamma_m;
    let limit = ORACLE_T0 + 60.0 / mech.gamma_m;
    let mut t_end = ORACLE_T0;
    while t_end < limit && (signal(t_end + step) - n_infinity).abs() > ORACLE_FLOOR {
        t_end += step;
    }
    if t_end - ORACLE_T0 < 1.0 / mech.gamma_m {
        return Err(Error::FitQuality(format!(
            "ring-down window [{ORACLE_T0}, {t_end}] too short for a fit"
        )));
    }

    let ts = crate::spectrum::uniform_grid(ORACLE_T0, t_end, ORACLE_SAMPLES);
    let ys: Vec<f64> = ts.iter().map(|&t| (signal(t) - n_infinity).abs().ln()).collect();
    let (slope, r_squared) = linear_fit(&ts, &ys);
    let fitted_rate = -slope;
    let outcome = OracleOutcome {
        gamma_opt: fitted_rate - mech.gamma_m,
        fitted_rate,
        n_infinity,
        r_squared,
        window: (ORACLE_T0, t_end),
        samples: ts.len(),
        mech_dim,
    };
    if !(r_squared >= 0.99) {
        return Err(Error::FitQuality(format!(
            "R² = {r_squared:.4} over [{ORACLE_T0}, {t_end:.1}], fitted rate {fitted_rate:.6e}, n_∞ = {n_infinity:.3e}"
        )));
    }
    Ok(outcome)
}

/// Least-squares slope and coefficient of determination.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}
