// SPDX-License-Identifier: Apache-2.0

//! WebAssembly front end for the static demo page in `www/`.
//!
//! Every export returns a JSON string; failures surface as a thrown
//! JavaScript error carrying the message. The `*_json` functions hold the
//! logic and are callable natively.

use dsopt::josephson::{blockade_roots, laguerre1, CavitySpec};
use dsopt::optomech::{self, MechanicalParams};
use dsopt::spectrum::{uniform_grid, SolvedCavity};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Grids larger than this are refused to keep the page responsive.
pub const MAX_POINTS: usize = 4001;

fn check_points(points: usize) -> Result<(), String> {
    if (2..=MAX_POINTS).contains(&points) {
        Ok(())
    } else {
        Err(format!("points must be in 2..={MAX_POINTS}, got {points}"))
    }
}

/// `(φ₀/√(n+1)) e^{−φ₀²/2} L_n^(1)(φ₀²)` for `n < levels`, the relative size
/// of each Fock transition versus `φ₀²`, plus the blockade roots.
pub fn blockade_curves_json(levels: usize, x_max: f64, points: usize) -> Result<String, String> {
    check_points(points)?;
    if !(x_max > 0.0) {
        return Err(format!("x_max must be > 0, got {x_max}"));
    }
    let roots = blockade_roots(levels).map_err(|e| e.to_string())?;
    let x = uniform_grid(0.0, x_max, points);
    let curves: Vec<Vec<f64>> = (0..levels)
        .map(|n| {
            x.iter()
                .map(|&x| x.sqrt() * (-x / 2.0).exp() * laguerre1(n, x) / ((n + 1) as f64).sqrt())
                .collect()
        })
        .collect();
    let doc = json!({
        "x": x,
        "curves": curves,
        "roots": roots.iter().map(|r| r.phi0_sq).collect::<Vec<_>>(),
    });
    Ok(doc.to_string())
}

/// Exact and secular `S_nn(ω)` on a symmetric grid around the transitions.
pub fn spectrum_json(levels: usize, delta: f64, ej: f64, root_index: usize, points: usize) -> Result<String, String> {
    check_points(points)?;
    let run = || -> dsopt::Result<Value> {
        let s = SolvedCavity::new(&CavitySpec::blockaded(levels, root_index, delta, ej)?)?;
        let grid = s.default_grid();
        let w = grid[grid.len() - 1];
        let omegas = uniform_grid(-w, w, points);
        let exact = s.exact(&omegas)?;
        let secular = s.secular(&omegas)?;
        Ok(json!({
            "omega": omegas,
            "exact": exact.values,
            "secular": secular.values,
            "transitions": s.table.rows.iter().map(|r| json!({"label": r.label(), "omega": r.omega})).collect::<Vec<_>>(),
            "populations": s.table.populations,
            "variance": exact.variance,
        }))
    };
    run().map(|v| v.to_string()).map_err(|e| e.to_string())
}

/// Populations and the resonance-tracked secular `Γ_opt` of every
/// transition across a detuning range.
pub fn detuning_scan_json(
    levels: usize,
    ej: f64,
    delta_min: f64,
    delta_max: f64,
    points: usize,
    g0: f64,
) -> Result<String, String> {
    check_points(points)?;
    if !(delta_min < delta_max) {
        return Err(format!("need delta_min < delta_max, got [{delta_min}, {delta_max}]"));
    }
    let mech = MechanicalParams::new(g0, 0.0, 0.0, 0.0).map_err(|e| e.to_string())?;
    let deltas = uniform_grid(delta_min, delta_max, points);
    let mut pops = vec![Vec::with_capacity(points); levels];
    let mut labels = Vec::new();
    let mut gamma: Vec<Vec<Option<f64>>> = Vec::new();
    for &d in &deltas {
        let cell = CavitySpec::blockaded(levels, 0, d, ej).and_then(|spec| SolvedCavity::new(&spec));
        let s = match cell {
            Ok(s) => s,
            Err(e) => return Err(format!("Δ = {d}: {e}")),
        };
        if labels.is_empty() {
            labels = s.table.rows.iter().map(|r| r.label()).collect();
            gamma = vec![Vec::with_capacity(points); labels.len()];
        }
        for (k, p) in s.table.populations.iter().enumerate() {
            pops[k].push(*p);
        }
        for (k, r) in s.table.rows.iter().enumerate() {
            let g = optomech::gamma_opt_secular(&s.table, &mech.with_omega_m(r.omega)).gamma_opt;
            gamma[k].push(g.is_finite().then_some(g));
        }
    }
    Ok(json!({
        "delta": deltas,
        "populations": pops,
        "labels": labels,
        "gamma_opt": gamma,
    })
    .to_string())
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|m| JsError::new(&m))
}

#[wasm_bindgen]
pub fn blockade_curves(levels: usize, x_max: f64, points: usize) -> Result<String, JsError> {
    to_js(blockade_curves_json(levels, x_max, points))
}

#[wasm_bindgen]
pub fn spectrum(levels: usize, delta: f64, ej: f64, root_index: usize, points: usize) -> Result<String, JsError> {
    to_js(spectrum_json(levels, delta, ej, root_index, points))
}

#[wasm_bindgen]
pub fn detuning_scan(
    levels: usize,
    ej: f64,
    delta_min: f64,
    delta_max: f64,
    points: usize,
    g0: f64,
) -> Result<String, JsError> {
    to_js(detuning_scan_json(levels, ej, delta_min, delta_max, points, g0))
}

#[wasm_bindgen]
pub fn version() -> String {
    dsopt::VERSION.to_string()
}
