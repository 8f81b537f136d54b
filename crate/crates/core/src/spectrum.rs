// SPDX-License-Identifier: Apache-2.0

//! Photon-number noise spectrum `S_nn(ω) = ∫dt e^{iωt} S̃_nn(t)`.
//!
//! Both routes reduce the stationary correlation function to a sum of
//! decaying modes, `S̃(t) = Σ_k c_k e^{λ_k t}` for `t ≥ 0`, extended to
//! negative times by `S̃(−t) = S̃(t)*`. Each mode then contributes
//! `2 Re[c_k / (−λ_k − iω)]` to the spectrum and exactly `Re c_k` to
//! `(1/2π)∫S dω`.
//!
//! * [`snn_exact`]: regression theorem on the full cavity Liouvillian.
//! * [`snn_secular`]: dressed-state Lorentzians, quasi-degenerate blocks
//!   and the population (rate-matrix) modes.

use serde::{Deserialize, Serialize};

use crate::dressed::{self, DressedBasis, RateMatrix, TransitionTable};
use crate::hilbert;
use crate::josephson::{build_hcav, CavitySpec};
use crate::lindblad::{self, DensityMatrix, Liouvillian};
use crate::linalg::{self, CMat, C64};
use crate::{Error, Result};

/// Number of samples in [`default_grid`].
pub const DEFAULT_GRID_POINTS: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Secular,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Secular => "secular",
        }
    }
}

/// One decaying mode `c e^{λ t}` of the correlation function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pole {
    pub residue: C64,
    pub rate: C64,
}

impl Pole {
    pub fn eval(&self, omega: f64) -> f64 {
        let denom = -self.rate - C64::new(0.0, omega);
        2.0 * (self.residue / denom).re
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoleExpansion {
    pub poles: Vec<Pole>,
}

impl PoleExpansion {
    pub fn eval(&self, omega: f64) -> f64 {
        self.poles.iter().map(|p| p.eval(omega)).sum()
    }

    /// `(1/2π)∫S dω`, exact for decaying modes.
    pub fn integrated_weight(&self) -> f64 {
        self.poles.iter().map(|p| p.residue.re).sum()
    }

    /// `S̃(t)` for `t ≥ 0`.
    pub fn correlation(&self, t: f64) -> C64 {
        self.poles.iter().map(|p| p.residue * (p.rate * t).exp()).sum()
    }

    fn from_modes(observable: &[C64], source: &[C64], modes: &ModalData, skip: Option<usize>) -> Self {
        let n = observable.len();
        let mut poles = Vec::with_capacity(n);
        for k in 0..n {
            if Some(k) == skip {
                continue;
            }
            let left: C64 = (0..n).map(|i| observable[i] * modes.right[(i, k)]).sum();
            let right: C64 = (0..n).map(|i| modes.left[(k, i)] * source[i]).sum();
            poles.push(Pole {
                residue: left * right,
                rate: modes.values[k],
            });
        }
        Self { poles }
    }
}

/// A term evaluated by one linear solve per frequency,
/// `2 Re[o · (−G − iω)⁻¹ s]`. Used when a generator is too close to
/// defective for a trustworthy eigenbasis.
#[derive(Clone, Debug)]
pub struct ResolventTerm {
    generator: CMat,
    source: CMat,
    observable: Vec<C64>,
}

impl ResolventTerm {
    pub fn eval(&self, omega: f64) -> Result<f64> {
        let n = self.generator.nrows();
        let shift = C64::new(0.0, -omega);
        let m = faer::Mat::from_fn(n, n, |i, j| {
            -self.generator[(i, j)] + if i == j { shift } else { C64::from(0.0) }
        });
        let x = linalg::solve(m.as_ref(), self.source.as_ref())?;
        let v: C64 = (0..n).map(|i| self.observable[i] * x[(i, 0)]).sum();
        Ok(2.0 * v.re)
    }

    /// `Re(o · s)`: the weight of a source with no stationary component.
    pub fn integrated_weight(&self) -> f64 {
        let n = self.observable.len();
        (0..n)
            .map(|i| self.observable[i] * self.source[(i, 0)])
            .sum::<C64>()
            .re
    }
}

#[derive(Clone, Debug)]
pub enum Term {
    Poles(PoleExpansion),
    Resolvent(ResolventTerm),
}

/// `S_nn(ω)` as a sum of terms, evaluable at any frequency.
#[derive(Clone, Debug)]
pub struct SpectralModel {
    pub method: Method,
    pub terms: Vec<Term>,
}

impl SpectralModel {
    pub fn eval(&self, omega: f64) -> Result<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            acc += match t {
                Term::Poles(p) => p.eval(omega),
                Term::Resolvent(r) => r.eval(omega)?,
            };
        }
        Ok(acc)
    }

    pub fn integrated_weight(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t {
                Term::Poles(p) => p.integrated_weight(),
                Term::Resolvent(r) => r.integrated_weight(),
            })
            .sum()
    }

    /// All modes, when every term is in pole form.
    pub fn poles(&self) -> Option<PoleExpansion> {
        let mut poles = Vec::new();
        for t in &self.terms {
            match t {
                Term::Poles(p) => poles.extend_from_slice(&p.poles),
                Term::Resolvent(_) => return None,
            }
        }
        Some(PoleExpansion { poles })
    }

    pub fn sample(&self, omegas: &[f64]) -> Result<Vec<f64>> {
        omegas.iter().map(|&w| self.eval(w)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub method: Method,
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    /// `⟨n²⟩ − ⟨n⟩²` as defined by the method (the secular value uses the
    /// secular stationary state for the mean subtracted by the zero mode).
    pub variance: f64,
    /// Analytic `(1/2π)∫S dω`.
    pub integrated_weight: f64,
    /// `|weight − variance| / variance` (absolute when the variance is 0).
    pub sum_rule_residual: f64,
    /// Quasi-degenerate transition groups used (secular only).
    pub clusters: Vec<Vec<usize>>,
    pub model: SpectralModel,
}

impl SpectrumResult {
    fn new(model: SpectralModel, omegas: &[f64], variance: f64, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let values = model.sample(omegas)?;
        let integrated_weight = model.integrated_weight();
        let defect = (integrated_weight - variance).abs();
        let sum_rule_residual = if variance.abs() > 1e-300 {
            defect / variance.abs()
        } else {
            defect
        };
        Ok(Self {
            method: model.method,
            omegas: omegas.to_vec(),
            values,
            variance,
            integrated_weight,
            sum_rule_residual,
            clusters,
            model,
        })
    }

    pub fn value_at(&self, omega: f64) -> Result<f64> {
        self.model.eval(omega)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

struct ModalData {
    values: Vec<C64>,
    right: CMat,
    left: CMat,
}

fn modal(m: &CMat) -> Option<ModalData> {
    let n = m.nrows();
    let (values, right) = linalg::eigen(m.as_ref()).ok()?;
    let left = linalg::inverse(right.as_ref()).ok()?;
    let lam = faer::Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::from(0.0) });
    let rebuilt = &(&right * &lam) * &left;
    let err = linalg::frobenius((&rebuilt - m).as_ref()) / linalg::frobenius(m.as_ref()).max(1e-300);
    (err < 1e-8).then_some(ModalData { values, right, left })
}

fn zero_mode(values: &[C64]) -> usize {
    (0..values.len())
        .min_by(|&i, &j| values[i].norm().total_cmp(&values[j].norm()))
        .unwrap_or(0)
}

/// Regression-theorem spectrum of `δn̂ = n̂ − ⟨n̂⟩` on the cavity Liouvillian.
pub fn snn_exact(liouv: &Liouvillian, rho: &DensityMatrix, omegas: &[f64]) -> Result<SpectrumResult> {
    let model = exact_model(liouv, rho)?;
    let dn = delta_n(rho)?;
    let variance = linalg::trace((&(&dn * &dn) * rho.matrix()).as_ref()).re;
    SpectrumResult::new(model, omegas, variance, Vec::new())
}

/// `n̂ − ⟨n̂⟩ 1`.
fn delta_n(rho: &DensityMatrix) -> Result<CMat> {
    let d = rho.dim();
    let n = hilbert::number(d)?;
    let mean = rho.expectation(&n).re;
    Ok(faer::Mat::from_fn(d, d, |i, j| {
        n.get(i, j) - if i == j { C64::from(mean) } else { C64::from(0.0) }
    }))
}

/// Pole expansion of the exact spectrum when the Liouvillian has a
/// well-conditioned eigenbasis, one resolvent solve per frequency otherwise.
pub fn exact_model(liouv: &Liouvillian, rho: &DensityMatrix) -> Result<SpectralModel> {
    if rho.dim() != liouv.dim() {
        return Err(Error::DimensionMismatch {
            expected: liouv.dim(),
            found: rho.dim(),
        });
    }
    let dn = delta_n(rho)?;
    let source_mat = lindblad::vectorize((&dn * rho.matrix()).as_ref());
    let source: Vec<C64> = (0..source_mat.nrows()).map(|i| source_mat[(i, 0)]).collect();
    let observable = lindblad::trace_functional(dn.as_ref());

    let n = liouv.dim() * liouv.dim();
    if n <= lindblad::EIGEN_BUDGET {
        let dec = liouv.eigendecompose()?;
        if dec.diagonalizable {
            let modes = ModalData {
                values: dec.eigenvalues.clone(),
                right: dec.right.clone(),
                left: dec.left.clone(),
            };
            let skip = dec.zero_mode();
            let poles = PoleExpansion::from_modes(&observable, &source, &modes, Some(skip));
            return Ok(SpectralModel {
                method: Method::Exact,
                terms: vec![Term::Poles(poles)],
            });
        }
    }
    Ok(SpectralModel {
        method: Method::Exact,
        terms: vec![Term::Resolvent(exact_resolvent(liouv, rho, source_mat, observable))],
    })
}

/// Deflated generator `L − |ρ⟩⟩⟨⟨1|`, invertible at every real ω.
fn exact_resolvent(liouv: &Liouvillian, rho: &DensityMatrix, source: CMat, observable: Vec<C64>) -> ResolventTerm {
    let d = liouv.dim();
    let n = d * d;
    let r = lindblad::vectorize(rho.matrix());
    let generator = faer::Mat::from_fn(n, n, |i, j| {
        let tr = if j % (d + 1) == 0 { r[(i, 0)] } else { C64::from(0.0) };
        liouv.matrix()[(i, j)] - tr
    });
    ResolventTerm {
        generator,
        source,
        observable,
    }
}

/// The exact spectrum through per-frequency solves, bypassing the
/// eigendecomposition. Exposed for cross-checks.
pub fn snn_exact_by_solves(liouv: &Liouvillian, rho: &DensityMatrix, omegas: &[f64]) -> Result<SpectrumResult> {
    let dn = delta_n(rho)?;
    let source = lindblad::vectorize((&dn * rho.matrix()).as_ref());
    let observable = lindblad::trace_functional(dn.as_ref());
    let variance = linalg::trace((&(&dn * &dn) * rho.matrix()).as_ref()).re;
    let model = SpectralModel {
        method: Method::Exact,
        terms: vec![Term::Resolvent(exact_resolvent(liouv, rho, source, observable))],
    };
    SpectrumResult::new(model, omegas, variance, Vec::new())
}

/// Secular spectrum from dressed-state data.
///
/// Resolved transitions give Lorentzians of weight `|n_αβ|² P_α` at
/// `+ω_βα` and `|n_αβ|² P_β` at `−ω_βα`, half-width `γ̃_αβ`. Clusters of
/// quasi-degenerate transitions are solved as small coupled blocks of
/// coherences. The diagonal part evolves under the rate matrix.
pub fn snn_secular(
    basis: &DressedBasis,
    table: &TransitionTable,
    rates: &RateMatrix,
    omegas: &[f64],
) -> Result<SpectrumResult> {
    let (model, variance) = secular_model(basis, table, rates)?;
    SpectrumResult::new(model, omegas, variance, table.clusters.clone())
}

/// The secular model and its closed-form variance
/// `Σ_{αβ}|n_αβ|² P_α − ⟨n⟩_P ⟨n⟩_π`, with `π` the null vector of `A`.
pub fn secular_model(
    basis: &DressedBasis,
    table: &TransitionTable,
    rates: &RateMatrix,
) -> Result<(SpectralModel, f64)> {
    let d = basis.dim();
    if rates.dim() != d || table.populations.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rates.dim(),
        });
    }
    let p = &table.populations;
    let mut terms = Vec::new();

    let mut peaks = PoleExpansion::default();
    for cluster in &table.clusters {
        if let [only] = cluster.as_slice() {
            let r = &table.rows[*only];
            let g = C64::from(r.width);
            let w = C64::new(0.0, r.omega);
            peaks.poles.push(Pole {
                residue: C64::from(r.n_sq * r.pop_low),
                rate: -g - w,
            });
            peaks.poles.push(Pole {
                residue: C64::from(r.n_sq * r.pop_high),
                rate: -g + w,
            });
            continue;
        }
        let upper: Vec<(usize, usize)> = cluster.iter().map(|&i| (table.rows[i].beta, table.rows[i].alpha)).collect();
        let lower: Vec<(usize, usize)> = upper.iter().map(|&(b, a)| (a, b)).collect();
        for block in [upper, lower] {
            match coherence_block(basis, p, &block) {
                Term::Poles(pe) => peaks.poles.extend(pe.poles),
                other => terms.push(other),
            }
        }
    }
    terms.insert(0, Term::Poles(peaks));

    let nn: Vec<C64> = (0..d).map(|k| C64::from(basis.n_dressed[(k, k)].re)).collect();
    let v0: Vec<C64> = (0..d).map(|k| nn[k] * p[k]).collect();
    let pi = rates.stationary()?;
    let a = rates.to_complex();
    match modal(&a) {
        Some(modes) => {
            let skip = zero_mode(&modes.values);
            terms.push(Term::Poles(PoleExpansion::from_modes(&nn, &v0, &modes, Some(skip))));
        }
        None => {
            let total: C64 = v0.iter().sum();
            let source = faer::Mat::from_fn(d, 1, |i, _| v0[i] - total * pi[i]);
            let generator = faer::Mat::from_fn(d, d, |i, j| a[(i, j)] - C64::from(pi[i]));
            terms.push(Term::Resolvent(ResolventTerm {
                generator,
                source,
                observable: nn.clone(),
            }));
        }
    }

    let mut variance = 0.0;
    for alpha in 0..d {
        for beta in 0..d {
            variance += basis.n_dressed[(alpha, beta)].norm_sqr() * p[alpha];
        }
    }
    let mean_p: f64 = (0..d).map(|k| nn[k].re * p[k]).sum();
    let mean_pi: f64 = (0..d).map(|k| nn[k].re * pi[k]).sum();
    variance -= mean_p * mean_pi;

    Ok((
        SpectralModel {
            method: Method::Secular,
            terms,
        },
        variance,
    ))
}

/// Coupled evolution of the coherences `(ρ_n)_μν` for `(μ, ν)` in `block`,
/// keeping the full dissipator among them:
/// `M_{(μν),(κλ)} = −iω_μν δ + a_μκ a*_νλ − ½ n_μκ δ_λν − ½ δ_μκ n_λν`.
fn coherence_block(basis: &DressedBasis, p: &[f64], block: &[(usize, usize)]) -> Term {
    let a = &basis.a_dressed;
    let n = &basis.n_dressed;
    let m = block.len();
    let gen = faer::Mat::from_fn(m, m, |row, col| {
        let (mu, nu) = block[row];
        let (ka, la) = block[col];
        let mut v = a[(mu, ka)] * a[(nu, la)].conj();
        if la == nu {
            v -= n[(mu, ka)] * 0.5;
        }
        if ka == mu {
            v -= n[(la, nu)] * 0.5;
        }
        if row == col {
            v -= C64::new(0.0, basis.energies[mu] - basis.energies[nu]);
        }
        v
    });
    let source: Vec<C64> = block.iter().map(|&(mu, nu)| n[(mu, nu)] * p[nu]).collect();
    let observable: Vec<C64> = block.iter().map(|&(mu, nu)| n[(nu, mu)]).collect();
    match modal(&gen) {
        Some(modes) => Term::Poles(PoleExpansion::from_modes(&observable, &source, &modes, None)),
        None => Term::Resolvent(ResolventTerm {
            generator: gen,
            source: linalg::column(&source),
            observable,
        }),
    }
}

/// `points` uniform samples over `[−1.25 ω_max, 1.25 ω_max]`.
pub fn default_grid(omega_max: f64) -> Vec<f64> {
    let span = if omega_max > 0.0 { 1.25 * omega_max } else { 10.0 };
    uniform_grid(-span, span, DEFAULT_GRID_POINTS)
}

pub fn uniform_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let step = (max - min) / (points - 1) as f64;
            (0..points).map(|k| min + step * k as f64).collect()
        }
    }
}

/// `grid` with `extra` frequencies merged in, sorted and without duplicates.
pub fn grid_with_points(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = grid.iter().chain(extra).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Local maximum of `model` in `[center − half_window, center + half_window]`:
/// a coarse scan followed by golden-section refinement. Returns
/// `(location, height)`.
pub fn find_peak(model: &SpectralModel, center: f64, half_window: f64) -> Result<(f64, f64)> {
    const SCAN: usize = 200;
    let lo = center - half_window;
    let step = 2.0 * half_window / SCAN as f64;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for k in 0..=SCAN {
        let v = model.eval(lo + step * k as f64)?;
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let (mut a, mut b) = (lo + step * best.saturating_sub(1) as f64, lo + step * (best + 1).min(SCAN) as f64);
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = model.eval(x1)?;
    let mut f2 = model.eval(x2)?;
    while b - a > 1e-10 * (1.0 + center.abs()) {
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = model.eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = model.eval(x2)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, model.eval(x)?))
}

/// Every intermediate of the cavity-only calculation for one parameter
/// point.
#[derive(Clone, Debug)]
pub struct SolvedCavity {
    pub spec: CavitySpec,
    pub liouvillian: Liouvillian,
    pub steady_state: DensityMatrix,
    pub basis: DressedBasis,
    pub table: TransitionTable,
    pub rates: RateMatrix,
}

impl SolvedCavity {
    pub fn new(spec: &CavitySpec) -> Result<Self> {
        Self::with_threshold(spec, dressed::DEFAULT_CLUSTER_THRESHOLD)
    }

    pub fn with_threshold(spec: &CavitySpec, cluster_threshold: f64) -> Result<Self> {
        let h = build_hcav(spec);
        let a = hilbert::annihilation(spec.n_levels)?;
        let liouvillian = lindblad::build_liouvillian(&h, &[(a, spec.gamma)])?;
        let steady_state = lindblad::steady_state(&liouvillian)?;
        let basis = dressed::diagonalize(&h)?;
        let table = dressed::transition_table_with_threshold(&basis, &steady_state, cluster_threshold)?;
        let rates = dressed::rate_matrix(&basis);
        Ok(Self {
            spec: *spec,
            liouvillian,
            steady_state,
            basis,
            table,
            rates,
        })
    }

    pub fn exact_model(&self) -> Result<SpectralModel> {
        exact_model(&self.liouvillian, &self.steady_state)
    }

    pub fn secular_model(&self) -> Result<SpectralModel> {
        Ok(secular_model(&self.basis, &self.table, &self.rates)?.0)
    }

    pub fn exact(&self, omegas: &[f64]) -> Result<SpectrumResult> {
        snn_exact(&self.liouvillian, &self.steady_state, omegas)
    }

    pub fn secular(&self, omegas: &[f64]) -> Result<SpectrumResult> {
        snn_secular(&self.basis, &self.table, &self.rates, omegas)
    }

    pub fn default_grid(&self) -> Vec<f64> {
        default_grid(self.table.omega_max())
    }

    pub fn mean_photon_number(&self) -> f64 {
        let n = hilbert::number(self.spec.n_levels).expect("N ≥ 2");
        self.steady_state.expectation(&n).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solved(n: usize, delta: f64, ej: f64) -> SolvedCavity {
        SolvedCavity::new(&CavitySpec::blockaded(n, 0, delta, ej).unwrap()).unwrap()
    }

    #[test]
    fn pole_line_shape() {
        let p = Pole {
            residue: C64::from(0.3),
            rate: C64::new(-0.5, -4.0),
        };
        let peak = p.eval(4.0);
        assert!((peak - 2.0 * 0.3 / 0.5).abs() < 1e-14);
        assert!((p.eval(4.5) - 2.0 * 0.3 * 0.5 / (0.25 + 0.25)).abs() < 1e-14);
    }

    #[test]
    fn undriven_spectrum_vanishes() {
        let s = solved(3, -10.0, 0.0);
        let r = s.exact(&uniform_grid(-40.0, 40.0, 101)).unwrap();
        assert!(r.values.iter().all(|v| v.abs() < 1e-14));
        assert!(r.variance.abs() < 1e-14);
    }

    #[test]
    fn exact_sum_rule() {
        for (n, delta, ej) in [(2, -26.0, 80.0), (3, -30.0, 300.0)] {
            let s = solved(n, delta, ej);
            let r = s.exact(&s.default_grid()).unwrap();
            assert!(r.sum_rule_residual < 1e-6, "{n}: {}", r.sum_rule_residual);
            assert!(r.min_value() > -1e-8);
        }
    }

    #[test]
    fn exact_poles_match_direct_solves() {
        let s = solved(3, -30.0, 300.0);
        let grid = uniform_grid(-250.0, 250.0, 41);
        let poles = s.exact(&grid).unwrap();
        let solves = snn_exact_by_solves(&s.liouvillian, &s.steady_state, &grid).unwrap();
        for (a, b) in poles.values.iter().zip(&solves.values) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        assert!((solves.integrated_weight - solves.variance).abs() < 1e-10);
    }

    #[test]
    fn correlation_at_zero_is_variance() {
        let s = solved(2, -26.0, 80.0);
        let pe = s.exact_model().unwrap().poles().unwrap();
        let v = pe.correlation(0.0);
        let r = s.exact(&[0.0]).unwrap();
        assert!((v.re - r.variance).abs() < 1e-10);
        assert!(v.im.abs() < 1e-10);
    }

    #[test]
    fn exact_side_peaks_sit_at_transition_frequencies() {
        let s = solved(3, -63.0, 300.0);
        let model = s.exact_model().unwrap();
        for r in &s.table.rows {
            for sign in [1.0, -1.0] {
                let (x, _) = find_peak(&model, sign * r.omega, 3.0).unwrap();
                assert!((x - sign * r.omega).abs() < 0.5, "{} vs {}", x, r.omega);
            }
        }
    }

    #[test]
    fn secular_sum_rule_is_exact() {
        for (n, delta, ej) in [(2, -26.0, 80.0), (3, -63.0, 300.0), (3, 0.0, 300.0), (3, -30.0, 300.0)] {
            let s = solved(n, delta, ej);
            let r = s.secular(&[0.0]).unwrap();
            assert!((r.integrated_weight - r.variance).abs() < 1e-10, "{n} {delta}");
        }
    }

    #[test]
    fn two_level_secular_peaks_symmetric_at_zero_detuning() {
        let s = solved(2, 0.0, 80.0);
        let m = s.secular_model().unwrap();
        let w = s.table.rows[0].omega;
        assert!((w - 2f64.sqrt() * s.spec.ej_star()).abs() < 1e-9);
        let (up, down) = (m.eval(w).unwrap(), m.eval(-w).unwrap());
        assert!((up - down).abs() < 0.02 * up);
    }

    #[test]
    fn peak_weight_asymmetry_tracks_population_imbalance() {
        let s = solved(2, -26.0, 80.0);
        let pe = s.secular_model().unwrap().poles().unwrap();
        let r = &s.table.rows[0];
        let weight_at = |sign: f64| -> f64 {
            pe.poles
                .iter()
                .filter(|p| (p.rate.im + sign * r.omega).abs() < 1e-9)
                .map(|p| p.residue.re)
                .sum()
        };
        let diff = weight_at(1.0) - weight_at(-1.0);
        assert!((diff - r.n_sq * r.imbalance()).abs() < 1e-12);
    }

    #[test]
    fn resolved_secular_matches_exact() {
        let s = solved(3, -63.0, 300.0);
        let ex = s.exact_model().unwrap();
        let sec = s.secular_model().unwrap();
        for r in &s.table.rows {
            for sign in [1.0, -1.0] {
                let (xe, he) = find_peak(&ex, sign * r.omega, 3.0).unwrap();
                let (xs, hs) = find_peak(&sec, sign * r.omega, 3.0).unwrap();
                assert!((he - hs).abs() < 0.1 * he);
                assert!((xe - xs).abs() < 0.5);
            }
        }
    }

    #[test]
    fn cluster_block_reduces_to_singletons_when_resolved() {
        // Forcing every transition into one cluster must not change the
        // spectrum when the block couplings are far off resonance.
        let spec = CavitySpec::blockaded(3, 0, -63.0, 300.0).unwrap();
        let single = SolvedCavity::with_threshold(&spec, 1e-6).unwrap();
        let merged = SolvedCavity::with_threshold(&spec, 1e3).unwrap();
        assert_eq!(merged.table.clusters.len(), 1);
        let a = single.secular_model().unwrap();
        let b = merged.secular_model().unwrap();
        for r in &single.table.rows {
            let (x, h) = find_peak(&a, r.omega, 3.0).unwrap();
            assert!((b.eval(x).unwrap() - h).abs() < 0.02 * h);
        }
    }

    #[test]
    fn degenerate_point_matches_exact() {
        let spec = CavitySpec::blockaded(3, 0, 0.0, 300.0).unwrap();
        let s = SolvedCavity::new(&spec).unwrap();
        assert!(s.table.has_clusters());
        let ex = s.exact_model().unwrap();
        let sec = s.secular_model().unwrap();
        for r in &s.table.rows {
            let (_, he) = find_peak(&ex, r.omega, 3.0).unwrap();
            let (_, hs) = find_peak(&sec, r.omega, 3.0).unwrap();
            assert!((hs - he).abs() < 1e-3 * he, "{}: exact {he} secular {hs}", r.label());
        }
    }

    #[test]
    fn resolvent_fallbacks_agree_with_poles() {
        let s = solved(3, -30.0, 300.0);
        let (model, _) = secular_model(&s.basis, &s.table, &s.rates).unwrap();
        let low = match &model.terms[1] {
            Term::Poles(p) => p.clone(),
            Term::Resolvent(_) => panic!("expected pole form"),
        };
        let d = 3;
        let p = &s.table.populations;
        let nn: Vec<C64> = (0..d).map(|k| C64::from(s.basis.n_dressed[(k, k)].re)).collect();
        let v0: Vec<C64> = (0..d).map(|k| nn[k] * p[k]).collect();
        let pi = s.rates.stationary().unwrap();
        let a = s.rates.to_complex();
        let total: C64 = v0.iter().sum();
        let term = ResolventTerm {
            generator: faer::Mat::from_fn(d, d, |i, j| a[(i, j)] - C64::from(pi[i])),
            source: faer::Mat::from_fn(d, 1, |i, _| v0[i] - total * pi[i]),
            observable: nn,
        };
        for w in [0.0, 0.3, 2.0, -5.0] {
            assert!((term.eval(w).unwrap() - low.eval(w)).abs() < 1e-10);
        }
        assert!((term.integrated_weight() - low.integrated_weight()).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        let g = default_grid(100.0);
        assert_eq!(g.len(), DEFAULT_GRID_POINTS);
        assert_eq!(g[0], -125.0);
        assert!((g[DEFAULT_GRID_POINTS - 1] - 125.0).abs() < 1e-12);
        assert_eq!(g[1000], 0.0);
        let merged = grid_with_points(&[0.0, 1.0], &[0.5, 1.0]);
        assert_eq!(merged, vec![0.0, 0.5, 1.0]);
    }
}
