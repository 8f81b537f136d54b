// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::{Command, Output};

fn dsopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsopt")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn roots_for_three_levels() {
    let o = dsopt(&["roots", "--levels", "3"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    let r: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!((r[0] - (3.0 - 3f64.sqrt())).abs() < 1e-12);
    assert!((r[1] - (3.0 + 3f64.sqrt())).abs() < 1e-12);
    assert_eq!(rows[0][2..], ["2".to_string(), "3".to_string()]);

    let two = csv_rows(&stdout(&dsopt(&["roots", "--levels", "2"])));
    assert_eq!(two.len(), 1);
    assert_eq!(two[0][1].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(dsopt(&["roots", "--levels", "1"]).status.code(), Some(1));
    assert_eq!(dsopt(&["roots"]).status.code(), Some(1));
    assert_eq!(dsopt(&["frobnicate"]).status.code(), Some(1));
    let bad_grid = dsopt(&[
        "spectrum", "--levels", "2", "--delta", "-26", "--ej", "80", "--omega-min", "5", "--omega-max", "-5",
    ]);
    assert_eq!(bad_grid.status.code(), Some(1));
    assert_eq!(dsopt(&["validate", "--only", "no-such-check"]).status.code(), Some(1));
    assert_eq!(dsopt(&["--help"]).status.code(), Some(0));
}

#[test]
fn spectrum_peaks_align_between_methods() {
    let o = dsopt(&["spectrum", "--levels", "3", "--delta", "-30", "--ej", "300", "--method", "both"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("omega,s_exact,s_secular\n"));
    let rows: Vec<[f64; 3]> = csv_rows(&text)
        .iter()
        .map(|r| [r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap()])
        .collect();
    // Local maxima on the positive side, away from the central peak.
    let peaks = |k: usize| -> Vec<f64> {
        (1..rows.len() - 1)
            .filter(|&i| rows[i][0] > 5.0 && rows[i][k] > rows[i - 1][k] && rows[i][k] > rows[i + 1][k])
            .map(|i| rows[i][0])
            .collect()
    };
    let (pe, ps) = (peaks(1), peaks(2));
    assert_eq!(pe.len(), ps.len());
    assert!(!pe.is_empty());
    for (a, b) in pe.iter().zip(&ps) {
        assert!((a - b).abs() < 0.5, "{a} vs {b}");
    }
}

#[test]
fn undriven_spectrum_is_zero() {
    let o = dsopt(&["spectrum", "--levels", "3", "--delta", "-30", "--ej", "0", "--method", "exact"]);
    assert!(o.status.success());
    assert!(csv_rows(&stdout(&o)).iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn cluster_threshold_is_reported() {
    let o = dsopt(&[
        "spectrum", "--levels", "3", "--delta", "0", "--ej", "300", "--method", "secular",
        "--cluster-threshold", "2.5", "--points", "11", "--format", "json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cluster_threshold"], 2.5);
    assert!(!v["secular"]["clusters"].as_array().unwrap().is_empty());
    assert!(v["transitions"][0]["cluster"].is_number());
    assert_eq!(v["spectrum"].as_array().unwrap().len(), 11);
}

#[test]
fn gamma_opt_routes_agree_and_out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let o = dsopt(&[
        "gamma-opt", "--levels", "2", "--delta", "-26", "--ej", "80", "--at", "1_0",
        "--out", path.to_str().unwrap(), "--format", "json",
    ]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let r = v["results"].as_array().unwrap();
    let (s, e) = (r[0]["gamma_opt"].as_f64().unwrap(), r[1]["gamma_opt"].as_f64().unwrap());
    assert!(s > 0.0 && (s - e).abs() < 0.01 * e);
    assert_eq!(dsopt(&["gamma-opt", "--levels", "2", "--delta", "-26", "--ej", "80", "--at", "0_1"]).status.code(), Some(1));
}

#[test]
fn sweep_stdout_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"system": {"n_levels": 3, "ej": 300},
            "mech": {"g0": 0.02, "omega_m": 40, "gamma_m": 0.01},
            "axes": [{"name": "delta", "min": -80, "max": 0, "points": 21}],
            "outputs": ["populations", "gamma_opt_peak"], "method": "both"}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let a = dsopt(&["sweep", "--config", c, "--workers", "1"]);
    let b = dsopt(&["sweep", "--config", c, "--workers", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("# dsopt-sweep v1\nindex,delta,pop_0,"));

    let out = dir.path().join("s.csv");
    let o = out.to_str().unwrap();
    assert!(dsopt(&["sweep", "--config", c, "--out", o]).status.success());
    assert_eq!(fs::read(&out).unwrap(), a.stdout);
    let full = fs::read_to_string(&out).unwrap();
    fs::write(&out, &full[..full.len() * 2 / 3]).unwrap();
    let r = dsopt(&["sweep", "--config", c, "--out", o, "--resume"]);
    assert!(r.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), full);
    assert!(String::from_utf8(r.stderr).unwrap().contains("inversion threshold"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s.csv.json")).unwrap()).unwrap();
    assert!(meta["resumed_cells"].as_u64().unwrap() > 0);

    fs::write(&cfg, r#"{"system": {"n_levels": 3, "ej": 300}, "bogus": true}"#).unwrap();
    assert_eq!(dsopt(&["sweep", "--config", c]).status.code(), Some(1));
}

#[test]
fn validate_single_check_and_mutant() {
    let o = dsopt(&["validate", "--only", "sum-rule", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert_eq!(v["checks"][0]["name"], "sum-rule");
    assert_eq!(v["passed"], true);

    let m = dsopt(&["validate", "--only", "sign-structure", "--dev-flip-sign"]);
    assert_eq!(m.status.code(), Some(2));
}

#[test]
fn oracle_subcommand_reports_fit() {
    let o = dsopt(&["oracle", "--levels", "2", "--delta", "-26", "--ej", "80", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let r = &v["results"][0];
    assert!(r["relative_difference"].as_f64().unwrap() < 0.15);
    assert!(r["r_squared"].as_f64().unwrap() > 0.99);
    let too_big = dsopt(&["oracle", "--levels", "2", "--delta", "-26", "--ej", "80", "--mech-dim", "40"]);
    assert_eq!(too_big.status.code(), Some(1));
}
