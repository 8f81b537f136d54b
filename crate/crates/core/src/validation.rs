// SPDX-License-Identifier: Apache-2.0

//! Self-validation suite.
//!
//! Each check pits the implementation against an independent route (closed
//! forms, a second numerical method, the fully coupled model, or tabulated
//! reference values) and reports pass/fail together with its wall time.
//! A check passes only if its physics criterion holds and it finishes
//! inside its time budget.

use std::time::Instant;

use serde::Serialize;

use crate::dressed::effective_width;
use crate::hilbert;
use crate::josephson::{blockade_leakage, blockade_roots, transition_element, CavitySpec};
use crate::optomech::{self, MechanicalParams};
use crate::spectrum::{find_peak, SolvedCavity};
use crate::sweep::{self, Axis, AxisName, Quantity, SweepConfig, SweepMethod, SystemConfig};
use crate::{Error, Result, C64};

/// Names accepted by [`run_check`], in execution order.
pub const CHECK_NAMES: [&str; 12] = [
    "blockade-roots",
    "franck-condon",
    "two-level",
    "sum-rule",
    "spectrum-agreement",
    "gamma-routes",
    "sign-structure",
    "inversion-window",
    "full-oracle",
    "residual-suppression",
    "blockade-robustness",
    "determinism",
];

/// Tabulated blockade values of `φ₀²` for `N = 2..6`, as usually quoted
/// (exact forms where they exist, otherwise three significant figures).
const REFERENCE_ROOTS: [(usize, &[f64]); 5] = [
    (2, &[2.0]),
    (3, &[1.267_949_192_431_122_7, 4.732_050_807_568_877]),
    (4, &[0.936, 3.31, 7.76]),
    (5, &[0.743, 2.57, 5.73, 11.0]),
    (6, &[0.617, 2.11, 4.61, 8.40, 14.3]),
];

#[derive(Clone, Copy, Debug, Default)]
pub struct Options {
    /// Flips the sign of every transition rate in the sign-structure check.
    /// A correct suite must then report a failure.
    pub flip_sign: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn budget(name: &str) -> f64 {
    match name {
        "blockade-roots" => 0.1,
        "franck-condon" | "two-level" => 1.0,
        "sum-rule" | "gamma-routes" | "residual-suppression" => 5.0,
        "spectrum-agreement" | "sign-structure" | "blockade-robustness" => 10.0,
        "inversion-window" => 30.0,
        "determinism" => 60.0,
        "full-oracle" => 120.0,
        _ => 0.0,
    }
}

/// Runs one named check.
pub fn run_check(name: &str, opts: &Options) -> Result<CheckReport> {
    let f: fn(&Options) -> Result<(bool, String)> = match name {
        "blockade-roots" => |_| blockade_root_values(),
        "franck-condon" => |_| franck_condon(),
        "two-level" => |_| two_level(),
        "sum-rule" => |_| sum_rule(),
        "spectrum-agreement" => |_| spectrum_agreement(),
        "gamma-routes" => |_| gamma_routes(),
        "sign-structure" => sign_structure,
        "inversion-window" => |_| inversion_window(),
        "full-oracle" => |_| full_oracle(),
        "residual-suppression" => |_| residual_suppression(),
        "blockade-robustness" => |_| blockade_robustness(),
        "determinism" => |_| determinism(),
        other => {
            return Err(Error::param(
                "check",
                format!("unknown check {other:?}; known: {}", CHECK_NAMES.join(", ")),
            ))
        }
    };
    let start = Instant::now();
    let outcome = f(opts);
    let elapsed_s = start.elapsed().as_secs_f64();
    let budget_s = budget(name);
    let (ok, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed_s <= budget_s;
    if !in_time {
        detail.push_str(&format!("; over budget ({elapsed_s:.2} s > {budget_s} s)"));
    }
    Ok(CheckReport {
        name: name.to_string(),
        passed: ok && in_time,
        detail,
        elapsed_s,
        budget_s,
    })
}

/// Runs the named checks, or all of them when `names` is empty.
pub fn run_selected(names: &[String], opts: &Options) -> Result<ValidationReport> {
    let selected: Vec<&str> = if names.is_empty() {
        CHECK_NAMES.to_vec()
    } else {
        names.iter().map(String::as_str).collect()
    };
    let checks = selected
        .into_iter()
        .map(|n| run_check(n, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

pub fn run_all(opts: &Options) -> ValidationReport {
    run_selected(&[], opts).expect("built-in check names are valid")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn round_sig(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits - 1 - x.abs().log10().floor() as i32);
    (x * scale).round() / scale
}

fn blockade_root_values() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for (n, printed) in REFERENCE_ROOTS {
        let roots = blockade_roots(n)?;
        if roots.len() != printed.len() {
            return Ok((false, format!("N = {n}: {} roots, expected {}", roots.len(), printed.len())));
        }
        for (r, &p) in roots.iter().zip(printed) {
            worst = worst.max(rel(r.phi0_sq, p));
            ok &= round_sig(r.phi0_sq, 3) == round_sig(p, 3) && r.blocked_transition == (n - 1, n);
        }
    }
    Ok((ok, format!("all roots agree to 3 significant figures; max relative deviation {worst:.2e}")))
}

fn franck_condon() -> Result<(bool, String)> {
    let sqrt3 = 3f64.sqrt();
    let mut worst: f64 = 0.0;
    for phi0_sq in [2.0, 3.0 - sqrt3, 3.31] {
        let spec = CavitySpec::new(4, 0.0, 80.0, phi0_sq.sqrt())?;
        let d = hilbert::displacement(C64::new(0.0, spec.phi0), 30)?;
        for n in 0..4 {
            let fc = d.get(n + 1, n) * (spec.ej / 2.0);
            let t = transition_element(n, &spec);
            // Elements at a blockade root vanish; they are compared on the
            // drive scale instead of their own size.
            let scale = t.norm().max(spec.ej_star() / 2.0 * 1e-3);
            worst = worst.max((fc - t).norm() / scale);
        }
    }
    Ok((worst < 1e-8, format!("max relative error {worst:.2e} (d = 30)")))
}

fn two_level() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for delta in [-50.0, -26.0, -8.0, 0.0, 8.0, 26.0, 50.0] {
        let spec = CavitySpec::blockaded(2, 0, delta, 80.0)?;
        let s = SolvedCavity::new(&spec)?;
        let e = spec.ej_star();
        let omega2 = ((delta / 2.0_f64).powi(2) + e * e / 2.0).sqrt();
        let denom = 4.0 * e * e + 2.0 * delta * delta;
        let n_sq = e * e / denom;
        let width = (3.0 * e * e + delta * delta) / denom;
        let b = &s.basis;
        worst = worst
            .max((b.omega(0, 1) - 2.0 * omega2).abs())
            .max((b.n_dressed[(0, 1)].norm_sqr() - n_sq).abs())
            .max((effective_width(b, 0, 1) - width).abs());
    }
    Ok((worst < 1e-10, format!("max deviation from closed forms {worst:.2e}")))
}

fn sum_rule() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (n, delta, ej) in [(2, -26.0, 80.0), (3, -30.0, 300.0)] {
        let s = SolvedCavity::new(&CavitySpec::blockaded(n, 0, delta, ej)?)?;
        let num = hilbert::number(n)?;
        let mean = s.steady_state.expectation(&num).re;
        let second = s.steady_state.expectation(&(&num * &num)).re;
        let var = second - mean * mean;
        let weight = s.exact_model()?.integrated_weight();
        worst = worst.max(rel(weight, var));
    }
    Ok((worst < 1e-6, format!("max relative sum-rule residual {worst:.2e}")))
}

fn resolved_point() -> Result<SolvedCavity> {
    SolvedCavity::new(&CavitySpec::blockaded(3, 0, -63.0, 300.0)?)
}

fn spectrum_agreement() -> Result<(bool, String)> {
    let s = resolved_point()?;
    let ex = s.exact_model()?;
    let sec = s.secular_model()?;
    let (mut dh, mut dx): (f64, f64) = (0.0, 0.0);
    let mut peaks = 0;
    for r in &s.table.rows {
        for sign in [1.0, -1.0] {
            let (xe, he) = find_peak(&ex, sign * r.omega, 3.0)?;
            let (xs, hs) = find_peak(&sec, sign * r.omega, 3.0)?;
            dh = dh.max(rel(hs, he));
            dx = dx.max((xs - xe).abs());
            peaks += 1;
        }
    }
    Ok((
        peaks == 6 && dh < 0.1 && dx < 0.5,
        format!("{peaks} peaks; max height deviation {:.2}%, max center offset {dx:.3}", 100.0 * dh),
    ))
}

fn gamma_routes() -> Result<(bool, String)> {
    let s = resolved_point()?;
    let ex = s.exact_model()?;
    let mech = MechanicalParams::new(0.02, 0.0, 0.01, 0.0)?;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let w = s.basis.omega(a, b);
        let m = mech.with_omega_m(w);
        let g_sec = optomech::gamma_opt_secular(&s.table, &m).gamma_opt;
        let g_ex = optomech::gamma_opt_from_model(&ex, &m)?;
        let d = rel(g_sec, g_ex);
        worst = worst.max(d);
        parts.push(format!("ω_{b}{a}: {:.2}%", 100.0 * d));
    }
    Ok((worst < 0.1, format!("secular vs exact Γ_opt: {}", parts.join(", "))))
}

fn sign_structure(opts: &Options) -> Result<(bool, String)> {
    let sign = if opts.flip_sign { -1.0 } else { 1.0 };
    let mech = MechanicalParams::new(0.02, 0.0, 0.01, 0.0)?;
    let tracked = |delta: f64| -> Result<f64> {
        let s = SolvedCavity::new(&CavitySpec::blockaded(2, 0, delta, 80.0)?)?;
        let m = mech.with_omega_m(s.basis.omega(0, 1));
        Ok(optomech::gamma_opt_secular_signed(&s.table, &m, sign).gamma_opt)
    };
    let mut ok = true;
    let mut bad = Vec::new();
    for d in [-8.0, -26.0, -38.0, -50.0] {
        let (cool, heat) = (tracked(d)?, tracked(-d)?);
        if !(cool > 0.0) {
            bad.push(format!("Γ_opt({d}) = {cool:.3e} not > 0"));
        }
        if !(heat < 0.0) {
            bad.push(format!("Γ_opt({}) = {heat:.3e} not < 0", -d));
        }
        ok &= cool > 0.0 && heat < 0.0;
    }
    let zero = tracked(0.0)?;
    if zero.abs() >= 1e-10 * mech.g0 * mech.g0 {
        ok = false;
        bad.push(format!("|Γ_opt(0)| = {:.3e}", zero.abs()));
    }
    let detail = if bad.is_empty() {
        format!("cooling for Δ < 0, heating for Δ > 0, |Γ_opt(0)| = {:.1e}", zero.abs())
    } else {
        bad.join("; ")
    };
    Ok((ok, detail))
}

fn inversion_config(workers: usize, points: usize, outputs: Vec<Quantity>, method: SweepMethod) -> SweepConfig {
    SweepConfig {
        system: SystemConfig {
            n_levels: 3,
            detuning: 0.0,
            ej: 300.0,
            root_index: 0,
            phi0_sq: None,
        },
        mech: MechanicalParams {
            g0: 0.02,
            omega_m: 40.0,
            gamma_m: 0.01,
            n_th: 0.0,
        },
        axes: vec![Axis {
            name: AxisName::Delta,
            min: -80.0,
            max: 0.0,
            points,
        }],
        outputs,
        method,
        cluster_threshold: crate::dressed::DEFAULT_CLUSTER_THRESHOLD,
        output: None,
        workers,
    }
}

fn inversion_window() -> Result<(bool, String)> {
    let cfg = inversion_config(0, 81, vec![Quantity::Populations], SweepMethod::Secular);
    let res = sweep::run_sweep(&cfg)?;
    let delta = res.column("delta").expect("axis column");
    let p1 = res.column("pop_1").expect("population column");
    let p2 = res.column("pop_2").expect("population column");
    let samples: Vec<(f64, f64, f64)> = (0..delta.len())
        .filter_map(|k| Some((delta[k]?, p1[k]?, p2[k]?)))
        .collect();
    let refine = |d: f64| -> Result<(f64, f64)> {
        let s = SolvedCavity::new(&CavitySpec::blockaded(3, 0, d, 300.0)?)?;
        Ok((s.table.populations[1], s.table.populations[2]))
    };
    let crossings = sweep::inversion_crossings(&samples, refine);
    let [dc] = crossings[..] else {
        return Ok((false, format!("expected one crossing, found {crossings:?}")));
    };
    if res.inversion_threshold != Some(dc) || !(dc < 0.0) {
        return Ok((false, format!("inconsistent threshold {dc} vs {:?}", res.inversion_threshold)));
    }
    let inverted = samples
        .iter()
        .filter(|s| s.0 > dc && s.0 < 0.0)
        .all(|&(_, p1, p2)| p2 > p1);
    let mid = 0.5 * dc;
    let s = SolvedCavity::new(&CavitySpec::blockaded(3, 0, mid, 300.0)?)?;
    let mech = cfg.mech;
    let g21 = optomech::gamma_opt_secular(&s.table, &mech.with_omega_m(s.basis.omega(1, 2))).gamma_opt;
    let g10 = optomech::gamma_opt_secular(&s.table, &mech.with_omega_m(s.basis.omega(0, 1))).gamma_opt;
    Ok((
        inverted && g21 < 0.0 && g10 > 0.0,
        format!(
            "Δ_c = {dc:.6}; P₂ > P₁ on (Δ_c, 0): {inverted}; at Δ = {mid:.3}: Γ_opt(ω₂₁) = {g21:.3e}, Γ_opt(ω₁₀) = {g10:.3e}"
        ),
    ))
}

fn full_oracle() -> Result<(bool, String)> {
    let spec = CavitySpec::blockaded(2, 0, -26.0, 80.0)?;
    let s = SolvedCavity::new(&spec)?;
    let mech = MechanicalParams::new(0.02, s.basis.omega(0, 1), 0.01, 0.0)?;
    let oracle = optomech::gamma_opt_full_oracle(&spec, &mech, 8)?;
    let secular = optomech::gamma_opt_secular(&s.table, &mech).gamma_opt;
    let d = rel(oracle.gamma_opt, secular);
    Ok((
        d < 0.15,
        format!(
            "oracle {:.4e} vs secular {secular:.4e} ({:.2}%), fit R² = {:.5}",
            oracle.gamma_opt,
            100.0 * d,
            oracle.r_squared
        ),
    ))
}

fn residual_suppression() -> Result<(bool, String)> {
    let nres = |delta: f64| -> Result<f64> {
        let s = SolvedCavity::new(&CavitySpec::blockaded(2, 0, delta, 80.0)?)?;
        optomech::n_residual(&s.table, (0, 1))
    };
    let (far, near) = (nres(-50.0)?, nres(-8.0)?);
    Ok((far < near / 10.0, format!("n̄^r(−50) = {far:.4e}, n̄^r(−8) = {near:.4e}")))
}

fn blockade_robustness() -> Result<(bool, String)> {
    let (mut worst_on, mut least_off) = (0.0f64, f64::INFINITY);
    for (n, _) in REFERENCE_ROOTS {
        for root in blockade_roots(n)? {
            // Same effective drive at every root.
            let ej = 100.0 * (root.phi0_sq / 2.0).exp();
            let on = CavitySpec::new(n, -10.0, ej, root.phi0_sq.sqrt())?;
            let off = CavitySpec::new(n, -10.0, ej, (root.phi0_sq + 0.05).sqrt())?;
            worst_on = worst_on.max(blockade_leakage(&on, 3)?);
            least_off = least_off.min(blockade_leakage(&off, 3)?);
        }
    }
    Ok((
        worst_on < 1e-10 && least_off > 1e-6,
        format!("max leakage at roots {worst_on:.2e}, min leakage when detuned from a root {least_off:.2e}"),
    ))
}

fn determinism() -> Result<(bool, String)> {
    let outputs = vec![
        Quantity::Populations,
        Quantity::TransitionFreqs,
        Quantity::Widths,
        Quantity::GammaOptPeak,
        Quantity::GammaOptCurve,
        Quantity::NResidual,
        Quantity::SnnSecular,
        Quantity::SnnExact,
    ];
    let one = inversion_config(1, 161, outputs.clone(), SweepMethod::Both);
    let four = inversion_config(4, 161, outputs, SweepMethod::Both);
    let a = sweep::run_sweep(&one)?.to_csv(&one);
    let b = sweep::run_sweep(&four)?.to_csv(&four);
    Ok((a == b, format!("{} bytes, {} rows", a.len(), one.cells())))
}
