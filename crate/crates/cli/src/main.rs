// SPDX-License-Identifier: Apache-2.0

//! `dsopt`: blockade roots, noise spectra, optomechanical damping, sweeps,
//! the full-model oracle and the self-validation suite.
//!
//! All physical quantities are in internal units: `ħ = 1` and frequencies,
//! energies and rates are multiples of the cavity decay rate `γ`.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for numerical or
//! validation failures.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsopt::josephson::{blockade_roots, CavitySpec};
use dsopt::optomech::{self, MechanicalParams};
use dsopt::spectrum::{self, SolvedCavity, DEFAULT_GRID_POINTS};
use dsopt::sweep::{self, SweepConfig};
use dsopt::validation::{self, Options};
use dsopt::Error;
use serde_json::json;

use output::{emit, Cell, Format, Table};

#[derive(Parser, Debug)]
#[command(name = "dsopt", version, about = "Dressed-state optomechanics of a Josephson-photonics cavity")]
#[command(after_help = "Units: hbar = 1; every frequency, energy and rate is in units of the cavity decay rate gamma.")]
struct Cli {
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Blockade values of phi0^2 for an N-level cavity.
    Roots {
        #[arg(long)]
        levels: usize,
    },
    /// Photon-number noise spectrum S_nn(omega).
    Spectrum {
        #[command(flatten)]
        cavity: CavityArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
        /// Lower edge of the frequency grid (default: -1.25 x largest transition).
        #[arg(long, requires = "omega_max", allow_hyphen_values = true)]
        omega_min: Option<f64>,
        /// Upper edge of the frequency grid.
        #[arg(long, requires = "omega_min", allow_hyphen_values = true)]
        omega_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        points: usize,
    },
    /// Optomechanical damping rate at one mechanical frequency.
    GammaOpt {
        #[command(flatten)]
        cavity: CavityArgs,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Both)]
        method: MethodArg,
    },
    /// Parameter sweep driven by a JSON configuration.
    Sweep {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Overrides the worker count of the configuration (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Keep finished rows of an existing output file and compute the rest.
        #[arg(long)]
        resume: bool,
    },
    /// Damping rate from the ring-down of the coupled cavity-mechanics model.
    Oracle {
        #[command(flatten)]
        cavity: CavityArgs,
        #[command(flatten)]
        mech: MechArgs,
        /// Phonon Fock levels kept in the coupled model.
        #[arg(long, default_value_t = 8)]
        mech_dim: usize,
    },
    /// Run the self-validation suite.
    Validate {
        /// Run only the named check (repeatable).
        #[arg(long, value_name = "CHECK")]
        only: Vec<String>,
        /// Mutation test: flip the sign of the transition rates.
        #[arg(long, hide = true)]
        dev_flip_sign: bool,
    },
}

#[derive(Args, Debug)]
struct CavityArgs {
    /// Number of cavity levels N kept by the blockade.
    #[arg(long)]
    levels: usize,
    /// Detuning Delta = omega_dc - omega_c.
    #[arg(long, allow_hyphen_values = true)]
    delta: f64,
    /// Bare Josephson energy E_J.
    #[arg(long)]
    ej: f64,
    /// Which blockade root of phi0^2 to use (ascending).
    #[arg(long, default_value_t = 0)]
    root_index: usize,
    /// Grouping threshold for quasi-degenerate transitions, in linewidths.
    #[arg(long, default_value_t = dsopt::dressed::DEFAULT_CLUSTER_THRESHOLD)]
    cluster_threshold: f64,
}

impl CavityArgs {
    fn solve(&self) -> Result<SolvedCavity, Error> {
        let spec = CavitySpec::blockaded(self.levels, self.root_index, self.delta, self.ej)?;
        SolvedCavity::with_threshold(&spec, self.cluster_threshold)
    }
}

#[derive(Args, Debug)]
struct MechArgs {
    /// Single-photon coupling g0.
    #[arg(long, default_value_t = 0.02)]
    g0: f64,
    /// Mechanical frequency.
    #[arg(long, conflicts_with = "at", allow_hyphen_values = true)]
    omega_m: Option<f64>,
    /// Put omega_m on a transition, written `beta_alpha` (e.g. `1_0`).
    #[arg(long)]
    at: Option<String>,
    /// Intrinsic mechanical damping gamma_m.
    #[arg(long, default_value_t = 0.01)]
    gamma_m: f64,
    /// Thermal phonon number of the mechanical bath.
    #[arg(long, default_value_t = 0.0)]
    n_th: f64,
}

impl MechArgs {
    /// Resolves `ω_m`, defaulting to the lowest transition.
    fn params(&self, solved: &SolvedCavity) -> Result<MechanicalParams, Error> {
        let omega_m = match (&self.omega_m, &self.at) {
            (Some(w), _) => *w,
            (None, Some(label)) => {
                let row = solved
                    .table
                    .rows
                    .iter()
                    .find(|r| r.label() == *label)
                    .ok_or_else(|| usage(format!("no transition {label:?}; use beta_alpha with beta > alpha")))?;
                row.omega
            }
            (None, None) => solved.basis.omega(0, 1),
        };
        MechanicalParams::new(self.g0, omega_m, self.gamma_m, self.n_th)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Secular,
    Both,
}

impl MethodArg {
    fn exact(self) -> bool {
        matches!(self, MethodArg::Exact | MethodArg::Both)
    }

    fn secular(self) -> bool {
        matches!(self, MethodArg::Secular | MethodArg::Both)
    }
}

fn usage(msg: String) -> Error {
    Error::Unsupported(msg)
}

/// Failure classes of the exit-code contract.
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::Config(_)
            | Error::OutsideGrid { .. }
            | Error::Unsupported(_)
            | Error::ZeroDimension => Failure::Usage(e.to_string()),
            Error::Io(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Roots { levels } => cmd_roots(*levels, out, cli.format),
        Command::Spectrum {
            cavity,
            method,
            omega_min,
            omega_max,
            points,
        } => cmd_spectrum(cavity, *method, omega_min.zip(*omega_max), *points, out, cli.format),
        Command::GammaOpt { cavity, mech, method } => cmd_gamma_opt(cavity, mech, *method, out, cli.format),
        Command::Sweep { config, workers, resume } => cmd_sweep(config, *workers, *resume, out, cli.format),
        Command::Oracle { cavity, mech, mech_dim } => cmd_oracle(cavity, mech, *mech_dim, out, cli.format),
        Command::Validate { only, dev_flip_sign } => cmd_validate(only, *dev_flip_sign, out, cli.format),
    }
}

fn warn_scope(mech: &MechanicalParams) {
    for w in mech.warnings() {
        eprintln!("warning: {w}");
    }
}

fn cmd_roots(levels: usize, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let roots = blockade_roots(levels)?;
    let mut t = Table::new("roots", &["n_levels", "phi0_sq", "blocked_from", "blocked_to"]);
    for r in &roots {
        t.push(vec![
            r.n_level.into(),
            r.phi0_sq.into(),
            r.blocked_transition.0.into(),
            r.blocked_transition.1.into(),
        ]);
    }
    emit(out, &t.render(format))?;
    Ok(())
}

fn cmd_spectrum(
    cavity: &CavityArgs,
    method: MethodArg,
    range: Option<(f64, f64)>,
    points: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let solved = cavity.solve()?;
    let grid = match range {
        Some((lo, hi)) => {
            if !(lo < hi) || points < 2 {
                return Err(Failure::Usage(format!(
                    "grid needs omega_min < omega_max and at least 2 points, got [{lo}, {hi}] with {points}"
                )));
            }
            spectrum::uniform_grid(lo, hi, points)
        }
        None if points < 2 => return Err(Failure::Usage("grid needs at least 2 points".into())),
        None => {
            let w = 1.25 * solved.table.omega_max();
            let w = if w > 0.0 { w } else { 10.0 };
            spectrum::uniform_grid(-w, w, points)
        }
    };
    let exact = method.exact().then(|| solved.exact(&grid)).transpose()?;
    let secular = method.secular().then(|| solved.secular(&grid)).transpose()?;

    let mut cols = vec!["omega"];
    if exact.is_some() {
        cols.push("s_exact");
    }
    if secular.is_some() {
        cols.push("s_secular");
    }
    let mut t = Table::new("spectrum", &cols);
    for (k, &w) in grid.iter().enumerate() {
        let mut row: Vec<Cell> = vec![w.into()];
        row.extend(exact.iter().map(|r| Cell::from(r.values[k])));
        row.extend(secular.iter().map(|r| Cell::from(r.values[k])));
        t.push(row);
    }
    t.meta("spec", serde_json::to_value(solved.spec).expect("serializable"));
    t.meta("cluster_threshold", cavity.cluster_threshold);
    t.meta("transitions", serde_json::to_value(&solved.table.rows).expect("serializable"));
    t.meta("populations", solved.table.populations.clone());
    for r in exact.iter().chain(secular.iter()) {
        t.meta(
            r.method.as_str(),
            json!({
                "variance": r.variance,
                "integrated_weight": r.integrated_weight,
                "sum_rule_residual": r.sum_rule_residual,
                "clusters": r.clusters,
            }),
        );
    }
    emit(out, &t.render(format))?;
    Ok(())
}

fn cmd_gamma_opt(
    cavity: &CavityArgs,
    mech: &MechArgs,
    method: MethodArg,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let solved = cavity.solve()?;
    let params = mech.params(&solved)?;
    warn_scope(&params);
    let mut t = Table::new("results", &["method", "omega_m", "gamma_opt", "n_residual", "n_steady"]);
    if method.secular() {
        let r = optomech::gamma_opt_secular(&solved.table, &params);
        t.push(vec!["secular".into(), r.omega_m.into(), r.gamma_opt.into(), r.n_residual.into(), r.n_steady.into()]);
        t.meta("per_transition", serde_json::to_value(&r.per_transition).expect("serializable"));
    }
    if method.exact() {
        let g = optomech::gamma_opt_from_model(&solved.exact_model()?, &params)?;
        let nr = optomech::n_residual_at(&solved.table, params.omega_m).ok();
        let ns = nr.and_then(|nr| optomech::n_steady(g, nr, &params).ok());
        t.push(vec!["exact".into(), params.omega_m.into(), g.into(), nr.into(), ns.into()]);
    }
    t.meta("spec", serde_json::to_value(solved.spec).expect("serializable"));
    t.meta("mech", serde_json::to_value(params).expect("serializable"));
    emit(out, &t.render(format))?;
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    workers: Option<usize>,
    resume: bool,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let mut cfg = SweepConfig::from_path(config)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    warn_scope(&cfg.mech);
    let target = out.map(Path::to_path_buf).or_else(|| cfg.output.clone());
    if resume && target.is_none() {
        return Err(Failure::Usage("--resume needs an output path".into()));
    }
    let failed = match (format, &target) {
        (Format::Csv, Some(path)) => {
            let meta = sweep::run_sweep_to_path(&cfg, path, resume)?;
            if let Some(dc) = meta.inversion_threshold {
                eprintln!("inversion threshold: {}", sweep::format_float(dc));
            }
            meta.failed_cells
        }
        (Format::Csv, None) => {
            let res = sweep::run_sweep(&cfg)?;
            emit(None, &res.to_csv(&cfg))?;
            res.failed_cells()
        }
        (Format::Json, _) => {
            let res = sweep::run_sweep(&cfg)?;
            let mut t = Table::new("rows", &res.columns.iter().map(String::as_str).collect::<Vec<_>>());
            for r in &res.rows {
                let mut row: Vec<Cell> = vec![r.index.into()];
                row.extend(r.coords.iter().map(|&v| Cell::from(v)));
                row.extend(r.values.iter().map(|&v| Cell::from(v)));
                row.push(r.error.clone().map_or(Cell::Empty, Cell::from));
                t.push(row);
            }
            t.meta("format", "dsopt-sweep v1");
            t.meta("version", dsopt::VERSION);
            t.meta("config", serde_json::to_value(&cfg).expect("serializable"));
            t.meta("inversion_threshold", json!(res.inversion_threshold));
            emit(target.as_deref(), &t.render(format))?;
            res.failed_cells()
        }
    };
    if failed > 0 {
        eprintln!("warning: {failed} cell(s) failed; see the error column");
    }
    Ok(())
}

fn cmd_oracle(
    cavity: &CavityArgs,
    mech: &MechArgs,
    mech_dim: usize,
    out: Option<&Path>,
    format: Format,
) -> Result<(), Failure> {
    let solved = cavity.solve()?;
    let params = mech.params(&solved)?;
    warn_scope(&params);
    let o = optomech::gamma_opt_full_oracle(&solved.spec, &params, mech_dim)?;
    let sec = optomech::gamma_opt_secular(&solved.table, &params).gamma_opt;
    let mut t = Table::new(
        "results",
        &[
            "omega_m",
            "gamma_opt_oracle",
            "gamma_opt_secular",
            "relative_difference",
            "fitted_rate",
            "n_infinity",
            "r_squared",
            "t_start",
            "t_end",
            "samples",
            "mech_dim",
        ],
    );
    t.push(vec![
        params.omega_m.into(),
        o.gamma_opt.into(),
        sec.into(),
        ((o.gamma_opt - sec).abs() / sec.abs()).into(),
        o.fitted_rate.into(),
        o.n_infinity.into(),
        o.r_squared.into(),
        o.window.0.into(),
        o.window.1.into(),
        o.samples.into(),
        o.mech_dim.into(),
    ]);
    t.meta("spec", serde_json::to_value(solved.spec).expect("serializable"));
    t.meta("mech", serde_json::to_value(params).expect("serializable"));
    emit(out, &t.render(format))?;
    Ok(())
}

fn cmd_validate(only: &[String], flip_sign: bool, out: Option<&Path>, format: Format) -> Result<(), Failure> {
    let opts = Options { flip_sign };
    let report = validation::run_selected(only, &opts)?;
    let mut t = Table::new("checks", &["name", "passed", "elapsed_s", "budget_s", "detail"]);
    for c in &report.checks {
        t.push(vec![
            c.name.as_str().into(),
            c.passed.into(),
            c.elapsed_s.into(),
            c.budget_s.into(),
            c.detail.as_str().into(),
        ]);
    }
    t.meta("passed", report.passed);
    emit(out, &t.render(format))?;
    if report.passed {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        Err(Failure::Numerical(format!("validation failed: {}", names.join(", "))))
    }
}
