// SPDX-License-Identifier: Apache-2.0

use std::fs;

use dsopt::hilbert;
use dsopt::josephson::{build_hcav_untruncated, CavitySpec};
use dsopt::lindblad::{build_liouvillian, steady_state};
use dsopt::optomech::{self, MechanicalParams};
use dsopt::spectrum::{self, find_peak, SolvedCavity};
use dsopt::sweep::{self, SweepConfig};

#[test]
fn truncated_spectrum_matches_untruncated_at_blockade() {
    let spec = CavitySpec::blockaded(3, 0, -30.0, 300.0).unwrap();
    let small = SolvedCavity::new(&spec).unwrap().exact_model().unwrap();

    let d = 6;
    let h = build_hcav_untruncated(&spec, d).unwrap();
    let liouv = build_liouvillian(&h, &[(hilbert::annihilation(d).unwrap(), 1.0)]).unwrap();
    let rho = steady_state(&liouv).unwrap();
    let big = spectrum::exact_model(&liouv, &rho).unwrap();

    for w in [-90.0, -47.5, -3.0, 0.5, 12.0, 47.5, 90.0] {
        let (a, b) = (small.eval(w).unwrap(), big.eval(w).unwrap());
        assert!((a - b).abs() < 1e-8 * a.abs().max(1e-6), "ω = {w}: {a} vs {b}");
    }
}

#[test]
fn undriven_cavity_is_silent() {
    let s = SolvedCavity::new(&CavitySpec::blockaded(3, 0, -30.0, 0.0).unwrap()).unwrap();
    let res = s.exact(&s.default_grid()).unwrap();
    assert!(res.values.iter().all(|&v| v == 0.0));
    let sec = s.secular(&s.default_grid()).unwrap();
    assert!(sec.values.iter().all(|&v| v.abs() < 1e-300));
}

#[test]
fn exact_peak_damping_tracks_secular_across_detuning() {
    let mech = MechanicalParams::new(0.02, 0.0, 0.01, 0.0).unwrap();
    for delta in [-70.0, -50.0, -38.0, -26.0] {
        let s = SolvedCavity::new(&CavitySpec::blockaded(2, 0, delta, 80.0).unwrap()).unwrap();
        let m = mech.with_omega_m(s.table.rows[0].omega);
        let sec = optomech::gamma_opt_secular(&s.table, &m).gamma_opt;
        let ex = optomech::gamma_opt_from_model(&s.exact_model().unwrap(), &m).unwrap();
        assert!((sec - ex).abs() < 0.05 * ex, "Δ = {delta}: {sec} vs {ex}");
        let (x, _) = find_peak(&s.exact_model().unwrap(), m.omega_m, 2.0).unwrap();
        assert!((x - m.omega_m).abs() < 0.5);
    }
}

#[test]
fn two_axis_sweep_file_with_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let cfg = SweepConfig::from_json(
        r#"{
            "system": {"n_levels": 3, "ej": 300},
            "mech": {"g0": 0.02, "omega_m": 40, "gamma_m": 0.01},
            "axes": [
                {"name": "delta", "min": -60, "max": -20, "points": 5},
                {"name": "omega_m", "min": 20, "max": 120, "points": 4}
            ],
            "outputs": ["gamma_opt_curve", "snn_exact", "snn_secular"],
            "method": "both",
            "workers": 3
        }"#,
    )
    .unwrap();
    let meta = sweep::run_sweep_to_path(&cfg, &path, false).unwrap();
    assert_eq!(meta.cells, 20);
    assert_eq!(meta.failed_cells, 0);
    assert!(meta.inversion_threshold.is_none());

    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# dsopt-sweep v1\nindex,delta,omega_m,gopt_secular,gopt_exact,"));
    let rows = sweep::parse_rows(&text, &cfg).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows[7].coords, cfg.coordinates(7));
    // The rate curve is g₀² times the spectrum asymmetry.
    for r in &rows {
        let v: Vec<f64> = r.values.iter().map(|x| x.unwrap()).collect();
        let g0sq = cfg.mech.g0 * cfg.mech.g0;
        assert!((v[1] - g0sq * (v[2] - v[3])).abs() <= 1e-12 * v[1].abs().max(1e-12));
    }

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sweep::sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar["columns"].as_array().unwrap().len(), 10);
    assert_eq!(sidecar["config"]["axes"][1]["name"], "omega_m");
}

#[test]
fn detuning_sweep_reports_inversion_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pops.csv");
    let cfg = SweepConfig::from_json(
        r#"{
            "system": {"n_levels": 3, "ej": 300},
            "mech": {"g0": 0.02, "omega_m": 40, "gamma_m": 0.01},
            "axes": [{"name": "delta", "min": -80, "max": 0, "points": 41}],
            "outputs": ["populations"]
        }"#,
    )
    .unwrap();
    let meta = sweep::run_sweep_to_path(&cfg, &path, false).unwrap();
    let dc = meta.inversion_threshold.unwrap();
    assert!(dc > -50.0 && dc < -45.0, "Δ_c = {dc}");
    let s = SolvedCavity::new(&CavitySpec::blockaded(3, 0, dc, 300.0).unwrap()).unwrap();
    assert!((s.table.populations[2] - s.table.populations[1]).abs() < 1e-8);
}
