// SPDX-License-Identifier: Apache-2.0

//! Config-driven parameter sweeps with deterministic CSV output.
//!
//! The grid is row-major over the configured axes (first axis slowest).
//! Cells are evaluated by a bounded pool of scoped threads and written in
//! grid order, so the file is independent of the worker count. An
//! interrupted run can be resumed: rows already on disk are kept verbatim
//! and only the missing cells are computed.
//!
//! File layout:
//!
//! ```text
//! # dsopt-sweep v1
//! index,delta,pop_0,pop_1,...,error
//! 0,-8.0000000000000000e1,...,
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dressed::DEFAULT_CLUSTER_THRESHOLD;
use crate::josephson::{blockade_roots, CavitySpec};
use crate::optomech::{self, MechanicalParams};
use crate::spectrum::SolvedCavity;
use crate::{Error, Result};

/// First line of every sweep CSV.
pub const FORMAT_LINE: &str = "# dsopt-sweep v1";
/// Upper bound on the number of grid cells.
pub const MAX_CELLS: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Delta,
    Ej,
    Phi0Sq,
    OmegaM,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Delta => "delta",
            AxisName::Ej => "ej",
            AxisName::Phi0Sq => "phi0_sq",
            AxisName::OmegaM => "omega_m",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        crate::spectrum::uniform_grid(self.min, self.max, self.points)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Populations,
    TransitionFreqs,
    Widths,
    GammaOptPeak,
    GammaOptCurve,
    NResidual,
    SnnExact,
    SnnSecular,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMethod {
    #[default]
    Secular,
    Exact,
    Both,
}

impl SweepMethod {
    fn secular(self) -> bool {
        matches!(self, SweepMethod::Secular | SweepMethod::Both)
    }

    fn exact(self) -> bool {
        matches!(self, SweepMethod::Exact | SweepMethod::Both)
    }
}

/// The cavity template. `phi0_sq` overrides `root_index` when given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n_levels: usize,
    #[serde(default)]
    pub detuning: f64,
    pub ej: f64,
    #[serde(default)]
    pub root_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0_sq: Option<f64>,
}

impl SystemConfig {
    pub fn spec(&self) -> Result<CavitySpec> {
        match self.phi0_sq {
            Some(x) if x > 0.0 => CavitySpec::new(self.n_levels, self.detuning, self.ej, x.sqrt()),
            Some(x) => Err(Error::param("phi0_sq", format!("must be > 0, got {x}"))),
            None => CavitySpec::blockaded(self.n_levels, self.root_index, self.detuning, self.ej),
        }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_CLUSTER_THRESHOLD
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub mech: MechanicalParams,
    pub axes: Vec<Axis>,
    pub outputs: Vec<Quantity>,
    #[serde(default)]
    pub method: SweepMethod,
    #[serde(default = "default_threshold")]
    pub cluster_threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// `0` means one worker per available core.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(Error::Config(m));
        self.system.spec()?;
        self.mech.validate()?;
        if self.axes.is_empty() || self.axes.len() > 2 {
            return cfg_err(format!("need one or two axes, got {}", self.axes.len()));
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return cfg_err("the two axes must differ".into());
        }
        let mut cells: usize = 1;
        for ax in &self.axes {
            if ax.points < 2 {
                return cfg_err(format!("axis {} needs at least 2 points", ax.name.as_str()));
            }
            if !(ax.min.is_finite() && ax.max.is_finite()) || ax.min == ax.max {
                return cfg_err(format!("axis {} needs distinct finite bounds", ax.name.as_str()));
            }
            if ax.name == AxisName::Phi0Sq && ax.min.min(ax.max) <= 0.0 {
                return cfg_err("phi0_sq axis must stay positive".into());
            }
            if ax.name == AxisName::Ej && ax.min.min(ax.max) < 0.0 {
                return cfg_err("ej axis must stay non-negative".into());
            }
            cells = cells.saturating_mul(ax.points);
        }
        if cells > MAX_CELLS {
            return cfg_err(format!("grid has {cells} cells, limit is {MAX_CELLS}"));
        }
        if self.outputs.is_empty() {
            return cfg_err("no outputs requested".into());
        }
        if !(self.cluster_threshold > 0.0) {
            return cfg_err(format!("cluster_threshold must be > 0, got {}", self.cluster_threshold));
        }
        Ok(())
    }

    fn outputs(&self) -> Vec<Quantity> {
        let mut q = self.outputs.clone();
        q.sort();
        q.dedup();
        q
    }

    pub fn cells(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Axis values of grid cell `index` (row-major, first axis slowest).
    pub fn coordinates(&self, index: usize) -> Vec<f64> {
        let mut rem = index;
        let mut coords = vec![0.0; self.axes.len()];
        for (k, ax) in self.axes.iter().enumerate().rev() {
            let i = rem % ax.points;
            rem /= ax.points;
            coords[k] = ax.values()[i];
        }
        coords
    }

    /// Cavity and mechanical parameters at the given axis values.
    pub fn point(&self, coords: &[f64]) -> Result<(CavitySpec, MechanicalParams)> {
        let mut sys = self.system.clone();
        let mut mech = self.mech;
        for (ax, &v) in self.axes.iter().zip(coords) {
            match ax.name {
                AxisName::Delta => sys.detuning = v,
                AxisName::Ej => sys.ej = v,
                AxisName::Phi0Sq => sys.phi0_sq = Some(v),
                AxisName::OmegaM => mech.omega_m = v,
            }
        }
        Ok((sys.spec()?, mech))
    }

    /// Column names, in order.
    pub fn columns(&self) -> Vec<String> {
        let n = self.system.n_levels;
        let labels: Vec<String> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| format!("{b}_{a}")))
            .collect();
        let mut cols = vec!["index".to_string()];
        cols.extend(self.axes.iter().map(|a| a.name.as_str().to_string()));
        for q in self.outputs() {
            match q {
                Quantity::Populations => cols.extend((0..n).map(|k| format!("pop_{k}"))),
                Quantity::TransitionFreqs => cols.extend(labels.iter().map(|l| format!("omega_{l}"))),
                Quantity::Widths => cols.extend(labels.iter().map(|l| format!("width_{l}"))),
                Quantity::GammaOptPeak => {
                    if self.method.secular() {
                        cols.extend(labels.iter().map(|l| format!("gopt_peak_secular_{l}")));
                    }
                    if self.method.exact() {
                        cols.extend(labels.iter().map(|l| format!("gopt_peak_exact_{l}")));
                    }
                }
                Quantity::GammaOptCurve => {
                    if self.method.secular() {
                        cols.push("gopt_secular".into());
                    }
                    if self.method.exact() {
                        cols.push("gopt_exact".into());
                    }
                }
                Quantity::NResidual => cols.extend(labels.iter().map(|l| format!("nres_{l}"))),
                Quantity::SnnExact => cols.extend(["snn_exact_pos".into(), "snn_exact_neg".into()]),
                Quantity::SnnSecular => cols.extend(["snn_secular_pos".into(), "snn_secular_neg".into()]),
            }
        }
        cols.push("error".into());
        cols
    }
}

/// One evaluated grid cell. `values` excludes the index and axis columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub coords: Vec<f64>,
    pub values: Vec<Option<f64>>,
    pub error: Option<String>,
}

impl SweepRow {
    /// CSV text of this row, newline-terminated.
    pub fn to_line(&self) -> String {
        let mut fields = vec![self.index.to_string()];
        fields.extend(self.coords.iter().map(|&v| format_float(v)));
        fields.extend(self.values.iter().map(|v| v.map(format_float).unwrap_or_default()));
        fields.push(self.error.clone().unwrap_or_default().replace(['\n', '\r'], " "));
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&fields).expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
    }
}

/// Round-trip safe float text (17 significant digits).
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_text(cfg: &SweepConfig) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(cfg.columns()).expect("in-memory write");
    let cols = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 header");
    format!("{FORMAT_LINE}\n{cols}")
}

/// Evaluates one grid cell. Numerical failures are recorded in the row.
pub fn evaluate_cell(cfg: &SweepConfig, index: usize) -> SweepRow {
    let coords = cfg.coordinates(index);
    let width = cfg.columns().len() - 2 - cfg.axes.len();
    match cell_values(cfg, &coords) {
        Ok(values) => SweepRow {
            index,
            coords,
            values,
            error: None,
        },
        Err(e) => SweepRow {
            index,
            coords,
            values: vec![None; width],
            error: Some(e.to_string()),
        },
    }
}

fn cell_values(cfg: &SweepConfig, coords: &[f64]) -> Result<Vec<Option<f64>>> {
    let (spec, mech) = cfg.point(coords)?;
    let solved = SolvedCavity::with_threshold(&spec, cfg.cluster_threshold)?;
    let table = &solved.table;
    let mut exact = None;
    let mut exact_model = || -> Result<crate::spectrum::SpectralModel> {
        if exact.is_none() {
            exact = Some(solved.exact_model()?);
        }
        Ok(exact.clone().expect("just set"))
    };
    let mut out = Vec::new();
    for q in cfg.outputs() {
        match q {
            Quantity::Populations => out.extend(table.populations.iter().map(|&p| Some(p))),
            Quantity::TransitionFreqs => out.extend(table.rows.iter().map(|r| Some(r.omega))),
            Quantity::Widths => out.extend(table.rows.iter().map(|r| Some(r.width))),
            Quantity::GammaOptPeak => {
                if cfg.method.secular() {
                    for r in &table.rows {
                        let m = mech.with_omega_m(r.omega);
                        out.push(Some(optomech::gamma_opt_secular(table, &m).gamma_opt));
                    }
                }
                if cfg.method.exact() {
                    let model = exact_model()?;
                    for r in &table.rows {
                        let m = mech.with_omega_m(r.omega);
                        out.push(Some(optomech::gamma_opt_from_model(&model, &m)?));
                    }
                }
            }
            Quantity::GammaOptCurve => {
                if cfg.method.secular() {
                    out.push(Some(optomech::gamma_opt_secular(table, &mech).gamma_opt));
                }
                if cfg.method.exact() {
                    out.push(Some(optomech::gamma_opt_from_model(&exact_model()?, &mech)?));
                }
            }
            Quantity::NResidual => {
                out.extend(table.rows.iter().map(|r| optomech::n_residual(table, (r.alpha, r.beta)).ok()))
            }
            Quantity::SnnExact => {
                let model = exact_model()?;
                out.push(Some(model.eval(mech.omega_m)?));
                out.push(Some(model.eval(-mech.omega_m)?));
            }
            Quantity::SnnSecular => {
                let model = solved.secular_model()?;
                out.push(Some(model.eval(mech.omega_m)?));
                out.push(Some(model.eval(-mech.omega_m)?));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
    pub inversion_threshold: Option<f64>,
}

impl SweepResult {
    pub fn to_csv(&self, cfg: &SweepConfig) -> String {
        let mut s = header_text(cfg);
        for r in &self.rows {
            s.push_str(&r.to_line());
        }
        s
    }

    pub fn failed_cells(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        let axes = self.rows.first().map(|r| r.coords.len()).unwrap_or(0);
        Some(
            self.rows
                .iter()
                .map(|r| {
                    if k == 0 {
                        Some(r.index as f64)
                    } else if k <= axes {
                        Some(r.coords[k - 1])
                    } else {
                        r.values.get(k - 1 - axes).copied().flatten()
                    }
                })
                .collect(),
        )
    }
}

fn worker_count(cfg: &SweepConfig) -> usize {
    match cfg.workers {
        0 => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        n => n,
    }
}

/// Evaluates `indices` on a pool of scoped threads, handing each finished
/// row to `sink` in ascending index order.
fn evaluate_ordered(cfg: &SweepConfig, indices: &[usize], mut sink: impl FnMut(SweepRow) -> Result<()>) -> Result<()> {
    let workers = worker_count(cfg).clamp(1, indices.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, SweepRow)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&index) = indices.get(k) else { break };
                if tx.send((k, evaluate_cell(cfg, index))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        let mut emitted = 0;
        for (k, row) in rx {
            pending.insert(k, row);
            while let Some(row) = pending.remove(&emitted) {
                sink(row)?;
                emitted += 1;
            }
        }
        Ok(())
    })
}

/// In-memory sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let indices: Vec<usize> = (0..cfg.cells()).collect();
    let mut rows = Vec::with_capacity(indices.len());
    evaluate_ordered(cfg, &indices, |r| {
        rows.push(r);
        Ok(())
    })?;
    let inversion_threshold = inversion_marker(cfg, &rows);
    Ok(SweepResult {
        columns: cfg.columns(),
        rows,
        inversion_threshold,
    })
}

/// JSON sidecar written next to the CSV.
#[derive(Clone, Debug, Serialize)]
pub struct SweepMetadata {
    pub format: String,
    pub version: String,
    pub config: SweepConfig,
    pub columns: Vec<String>,
    pub cells: usize,
    pub computed_cells: usize,
    pub resumed_cells: usize,
    pub failed_cells: usize,
    pub inversion_threshold: Option<f64>,
    pub blockade_roots: Vec<f64>,
    pub wall_time_s: f64,
}

/// Path of the metadata sidecar for a CSV output.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Streams the sweep to `path`, resuming from an existing partial file when
/// `resume` is set. Returns the metadata that was also written to the
/// JSON sidecar.
pub fn run_sweep_to_path(cfg: &SweepConfig, path: &Path, resume: bool) -> Result<SweepMetadata> {
    cfg.validate()?;
    let start = Instant::now();
    let header = header_text(cfg);
    let n_cols = cfg.columns().len();
    let cells = cfg.cells();

    let mut kept: BTreeMap<usize, String> = BTreeMap::new();
    if resume && path.exists() {
        kept = existing_rows(&fs::read_to_string(path)?, &header, n_cols, cells)?;
    }
    let missing: Vec<usize> = (0..cells).filter(|i| !kept.contains_key(i)).collect();

    let tmp = {
        let mut name = path.as_os_str().to_owned();
        name.push(".partial");
        PathBuf::from(name)
    };
    let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
    file.write_all(header.as_bytes())?;

    let mut rows: Vec<SweepRow> = Vec::with_capacity(cells);
    let mut cursor = 0;
    let flush_kept = |upto: usize, file: &mut std::io::BufWriter<fs::File>, cursor: &mut usize| -> Result<()> {
        while *cursor < upto {
            if let Some(line) = kept.get(cursor) {
                file.write_all(line.as_bytes())?;
            }
            *cursor += 1;
        }
        Ok(())
    };
    evaluate_ordered(cfg, &missing, |row| {
        flush_kept(row.index, &mut file, &mut cursor)?;
        file.write_all(row.to_line().as_bytes())?;
        file.flush()?;
        cursor = row.index + 1;
        rows.push(row);
        Ok(())
    })?;
    flush_kept(cells, &mut file, &mut cursor)?;
    file.flush()?;
    drop(file);
    fs::rename(&tmp, path)?;

    // Rows kept from disk are re-read so the inversion marker sees the whole grid.
    let text = fs::read_to_string(path)?;
    let all = parse_rows(&text, cfg)?;
    let failed = all.iter().filter(|r| r.error.is_some()).count();
    let inversion_threshold = inversion_marker(cfg, &all);
    let meta = SweepMetadata {
        format: FORMAT_LINE.trim_start_matches("# ").to_string(),
        version: crate::VERSION.to_string(),
        config: cfg.clone(),
        columns: cfg.columns(),
        cells,
        computed_cells: missing.len(),
        resumed_cells: cells - missing.len(),
        failed_cells: failed,
        inversion_threshold,
        blockade_roots: blockade_roots(cfg.system.n_levels)?.iter().map(|r| r.phi0_sq).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

/// Complete, well-formed rows of an earlier run with the same schema.
fn existing_rows(text: &str, header: &str, n_cols: usize, cells: usize) -> Result<BTreeMap<usize, String>> {
    let Some(body) = text.strip_prefix(header) else {
        return Err(Error::Config(
            "existing output has a different header; refusing to resume".into(),
        ));
    };
    let mut kept = BTreeMap::new();
    for line in body.split_inclusive('\n') {
        if !line.ends_with('\n') {
            break;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(line.as_bytes());
        let Some(Ok(rec)) = rdr.records().next() else { continue };
        if rec.len() != n_cols {
            continue;
        }
        if let Ok(i) = rec[0].parse::<usize>() {
            if i < cells {
                kept.entry(i).or_insert_with(|| line.to_string());
            }
        }
    }
    Ok(kept)
}

/// Parses a complete sweep CSV back into rows.
pub fn parse_rows(text: &str, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let header = header_text(cfg);
    let body = text
        .strip_prefix(&header)
        .ok_or_else(|| Error::Config("sweep CSV header does not match the configuration".into()))?;
    let axes = cfg.axes.len();
    let n_cols = cfg.columns().len();
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != n_cols {
            return Err(Error::Config(format!("row with {} fields, expected {n_cols}", rec.len())));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Config(format!("bad number {s:?}")))
            }
        };
        let index = rec[0].parse().map_err(|_| Error::Config(format!("bad index {:?}", &rec[0])))?;
        let coords = (1..=axes)
            .map(|k| num(&rec[k]).map(|v| v.unwrap_or(f64::NAN)))
            .collect::<Result<_>>()?;
        let values = (axes + 1..n_cols - 1).map(|k| num(&rec[k])).collect::<Result<_>>()?;
        let err = &rec[n_cols - 1];
        rows.push(SweepRow {
            index,
            coords,
            values,
            error: (!err.is_empty()).then(|| err.to_string()),
        });
    }
    Ok(rows)
}

/// `Δ_c` for a one-dimensional detuning sweep of an `N ≥ 3` cavity with
/// populations requested.
fn inversion_marker(cfg: &SweepConfig, rows: &[SweepRow]) -> Option<f64> {
    if cfg.system.n_levels < 3
        || cfg.axes.len() != 1
        || cfg.axes[0].name != AxisName::Delta
        || !cfg.outputs.contains(&Quantity::Populations)
    {
        return None;
    }
    let axes = 1;
    let pop_offset = cfg.columns().iter().position(|c| c == "pop_0")? - 1 - axes;
    let samples: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| {
            let p1 = r.values.get(pop_offset + 1).copied().flatten()?;
            let p2 = r.values.get(pop_offset + 2).copied().flatten()?;
            Some((r.coords[0], p1, p2))
        })
        .collect();
    let refine = |delta: f64| -> Result<(f64, f64)> {
        let mut sys = cfg.system.clone();
        sys.detuning = delta;
        let s = SolvedCavity::with_threshold(&sys.spec()?, cfg.cluster_threshold)?;
        Ok((s.table.populations[1], s.table.populations[2]))
    };
    detect_inversion_threshold(&samples, refine)
}

/// Detunings where `P₂ − P₁` changes sign between consecutive samples
/// `(Δ, P₁, P₂)`, each refined by bisection on fresh evaluations until
/// `|P₂ − P₁| < 1e−8`. Samples need not be sorted.
pub fn inversion_crossings(
    samples: &[(f64, f64, f64)],
    refine: impl Fn(f64) -> Result<(f64, f64)>,
) -> Vec<f64> {
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (x0, a1, a2) = w[0];
        let (x1, b1, b2) = w[1];
        let (f0, f1) = (a2 - a1, b2 - b1);
        if f0 * f1 >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (x0, x1, f0);
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..200 {
            mid = 0.5 * (lo + hi);
            let Ok((p1, p2)) = refine(mid) else { break };
            let fm = p2 - p1;
            if fm.abs() < 1e-8 || hi - lo < 1e-13 {
                break;
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        out.push(mid);
    }
    out
}

/// The population-inversion threshold `Δ_c`: the crossing of `P₂ = P₁`
/// closest to resonance (largest `Δ`), or `None` without a sign change.
/// Needs at least 10 samples.
pub fn detect_inversion_threshold(
    samples: &[(f64, f64, f64)],
    refine: impl Fn(f64) -> Result<(f64, f64)>,
) -> Option<f64> {
    if samples.len() < 10 {
        return None;
    }
    inversion_crossings(samples, refine).into_iter().reduce(f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> SweepConfig {
        SweepConfig::from_json(json).unwrap()
    }

    const TWO_LEVEL: &str = r#"{
        "system": {"n_levels": 2, "ej": 80},
        "mech": {"g0": 0.02, "omega_m": 40, "gamma_m": 0.01},
        "axes": [{"name": "delta", "min": -60, "max": 60, "points": 13}],
        "outputs": ["populations", "gamma_opt_peak", "n_residual", "transition_freqs"],
        "method": "both"
    }"#;

    #[test]
    fn unknown_keys_rejected() {
        let bad = TWO_LEVEL.replace("\"method\"", "\"bogus\": 1, \"method\"");
        assert!(matches!(SweepConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = TWO_LEVEL.replace("gamma_opt_peak", "magic");
        assert!(SweepConfig::from_json(&bad).is_err());
    }

    #[test]
    fn validation_guards() {
        let one = TWO_LEVEL.replace("\"points\": 13", "\"points\": 1");
        assert!(SweepConfig::from_json(&one).is_err());
        let same = TWO_LEVEL.replace("\"max\": 60", "\"max\": -60");
        assert!(SweepConfig::from_json(&same).is_err());
        let big = TWO_LEVEL.replace(
            r#"[{"name": "delta", "min": -60, "max": 60, "points": 13}]"#,
            r#"[{"name": "delta", "min": -60, "max": 60, "points": 2000},
                {"name": "ej", "min": 1, "max": 90, "points": 2000}]"#,
        );
        assert!(SweepConfig::from_json(&big).is_err());
    }

    #[test]
    fn grid_is_row_major() {
        let cfg = config(&TWO_LEVEL.replace(
            r#"[{"name": "delta", "min": -60, "max": 60, "points": 13}]"#,
            r#"[{"name": "delta", "min": -1, "max": 1, "points": 3},
                {"name": "ej", "min": 10, "max": 20, "points": 2}]"#,
        ));
        assert_eq!(cfg.cells(), 6);
        assert_eq!(cfg.coordinates(0), vec![-1.0, 10.0]);
        assert_eq!(cfg.coordinates(1), vec![-1.0, 20.0]);
        assert_eq!(cfg.coordinates(5), vec![1.0, 20.0]);
    }

    #[test]
    fn columns_follow_outputs() {
        let cfg = config(TWO_LEVEL);
        let cols = cfg.columns();
        assert_eq!(cols.first().unwrap(), "index");
        assert_eq!(cols[1], "delta");
        assert!(cols.contains(&"gopt_peak_secular_1_0".to_string()));
        assert!(cols.contains(&"gopt_peak_exact_1_0".to_string()));
        assert_eq!(cols.last().unwrap(), "error");
    }

    #[test]
    fn two_level_peak_curve_shape() {
        let res = run_sweep(&config(TWO_LEVEL)).unwrap();
        assert_eq!(res.rows.len(), 13);
        assert_eq!(res.failed_cells(), 0);
        let delta = res.column("delta").unwrap();
        let peak = res.column("gopt_peak_secular_1_0").unwrap();
        let exact = res.column("gopt_peak_exact_1_0").unwrap();
        for ((d, g), e) in delta.iter().zip(&peak).zip(&exact) {
            let (d, g, e) = (d.unwrap(), g.unwrap(), e.unwrap());
            if d < 0.0 {
                assert!(g > 0.0 && e > 0.0);
            } else if d > 0.0 {
                assert!(g < 0.0 && e < 0.0);
            } else {
                assert!(g.abs() < 1e-12);
            }
        }
        // Antisymmetric lobes with an interior maximum on the cooling side.
        let g: Vec<f64> = peak.iter().map(|v| v.unwrap()).collect();
        for k in 0..6 {
            assert!((g[k] + g[12 - k]).abs() < 1e-6 * g[k].abs());
        }
        let imax = (0..6).max_by(|&a, &b| g[a].total_cmp(&g[b])).unwrap();
        assert!(imax > 0 && imax < 6, "maximum at index {imax}: {g:?}");
        let nres = res.column("nres_1_0").unwrap();
        assert!(nres[0].is_some() && nres[12].is_none());
    }

    #[test]
    fn failed_cells_are_recorded() {
        let mut cfg = config(TWO_LEVEL);
        // Bypasses validation so that the first cell is unphysical.
        cfg.axes[0] = Axis {
            name: AxisName::Ej,
            min: -10.0,
            max: 10.0,
            points: 2,
        };
        let bad = evaluate_cell(&cfg, 0);
        assert!(bad.error.as_deref().unwrap().contains("E_J"));
        assert!(bad.values.iter().all(Option::is_none));
        assert_eq!(bad.values.len(), cfg.columns().len() - 3);
        assert!(bad.to_line().ends_with("\n"));
        let good = evaluate_cell(&cfg, 1);
        assert!(good.error.is_none());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_cell_matches_direct_call() {
        let cfg = config(TWO_LEVEL);
        let res = run_sweep(&cfg).unwrap();
        let (spec, mech) = cfg.point(&cfg.coordinates(3)).unwrap();
        let s = SolvedCavity::new(&spec).unwrap();
        let w = s.table.rows[0].omega;
        let direct = optomech::gamma_opt_secular(&s.table, &mech.with_omega_m(w)).gamma_opt;
        let col = res.column("gopt_peak_secular_1_0").unwrap();
        assert_eq!(col[3].unwrap().to_bits(), direct.to_bits());
    }

    #[test]
    fn inversion_detection_synthetic() {
        let never = |_: f64| -> Result<(f64, f64)> { unreachable!() };
        let flat: Vec<(f64, f64, f64)> = (0..12).map(|k| (k as f64, 0.5, 0.1)).collect();
        assert_eq!(detect_inversion_threshold(&flat, never), None);
        assert_eq!(detect_inversion_threshold(&flat[..5], never), None);
        // P₂ − P₁ = x − 3.3 crosses once.
        let lin: Vec<(f64, f64, f64)> = (0..12).map(|k| (k as f64, 3.3, k as f64)).collect();
        let dc = detect_inversion_threshold(&lin, |x| Ok((3.3, x))).unwrap();
        assert!((dc - 3.3).abs() < 1e-8);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -26.0, 1.0 / 3.0, 6.02e23, -1e-300] {
            assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        assert_eq!(format_float(-26.0), "-2.6000000000000000e1");
    }

    #[test]
    fn csv_round_trip_and_workers() {
        let mut cfg = config(TWO_LEVEL);
        let a = run_sweep(&cfg).unwrap().to_csv(&cfg);
        cfg.workers = 3;
        let b = run_sweep(&cfg).unwrap().to_csv(&cfg);
        assert_eq!(a, b);
        let parsed = parse_rows(&a, &cfg).unwrap();
        assert_eq!(parsed, run_sweep(&cfg).unwrap().rows);
    }

    #[test]
    fn resume_completes_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let mut cfg = config(TWO_LEVEL);
        cfg.workers = 2;
        run_sweep_to_path(&cfg, &path, false).unwrap();
        let full = fs::read_to_string(&path).unwrap();

        // Keep the header, every other row, and half of one more line.
        let mut lines: Vec<&str> = full.split_inclusive('\n').collect();
        let tail = lines.pop().unwrap();
        let mut partial: String = lines[..2].concat();
        for (k, l) in lines[2..].iter().enumerate() {
            if k % 2 == 0 {
                partial.push_str(l);
            }
        }
        partial.push_str(&tail[..tail.len() / 2]);
        fs::write(&path, &partial).unwrap();

        let meta = run_sweep_to_path(&cfg, &path, true).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), full);
        assert_eq!(meta.resumed_cells, 6);
        assert_eq!(meta.computed_cells, 7);
        let sidecar: serde_json::Value = serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(sidecar["cells"], 13);

        let other = TWO_LEVEL.replace("\"both\"", "\"secular\"");
        assert!(run_sweep_to_path(&config(&other), &path, true).is_err());
    }
}
