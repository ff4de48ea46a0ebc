//! `annulus-min`: construct, minimize, and diagnose energy-minimizing maps
//! between circular annuli.
//!
//! Every subcommand builds an [`EffectiveConfig`], validates it, and runs the
//! matching report assembly from `annulus_core::report`; the `run` subcommand
//! reads the same configuration from a JSON file instead of flags, so files
//! and flags go through identical validation and produce identical reports.
//!
//! The report body is printed to stdout as JSON. With `--out` the same body
//! is also written to disk inside an envelope that carries the timestamp, so
//! the body itself stays byte-reproducible. Exit codes: `0` success, `1`
//! numerical failure (a partial report is still emitted when one exists),
//! `2` configuration error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use annulus_core::energy::DiscreteMap;
use annulus_core::report::{
    admissibility_cli_report, diagnose_report, envelope_now, explore_report, minimize_report,
    nitsche_radius_report, radial_report, EffectiveConfig, MetricSpec, ReportError,
};

/// Worker-thread cap honored before any parallel work starts; affects only
/// speed, never results.
const THREADS_ENV: &str = "ANNULUS_MIN_THREADS";

#[derive(Parser)]
#[command(
    name = "annulus-min",
    version,
    about = "Energy-minimizing maps between circular annuli: radial families, \
             variational minimization, and structural diagnostics",
    after_help = "Environment:\n  ANNULUS_MIN_THREADS  cap on worker threads \
                  (affects speed only, never results)\n\nExit codes:\n  0  \
                  success\n  1  numerical failure (partial report emitted when \
                  available)\n  2  configuration error"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one member of the radial map family for a rotationally
    /// symmetric metric.
    Radial(RadialArgs),
    /// Critical inner radius and critical family constant of a radial metric.
    NitscheRadius(NitscheRadiusArgs),
    /// Minimize the weighted Dirichlet energy over maps A(X,1) -> A(Y,1).
    Minimize(MinimizeArgs),
    /// Diagnose a dumped map: energy split, Hopf fit, quasiconformality
    /// certificate, and boundary Holder exponents.
    Diagnose(DiagnoseArgs),
    /// Admissibility audit of a metric over an annulus.
    Admissibility(AdmissibilityArgs),
    /// Estimate the critical inner radius variationally, by bisection over
    /// full minimization runs.
    Explore(ExploreArgs),
    /// Execute a command described by a JSON config file (same schema as the
    /// embedded effective_config blocks).
    Run(RunArgs),
}

/// Metric selector shared by all subcommands: a kind name, inline JSON, or a
/// path to a JSON file.
#[derive(Args)]
struct MetricArg {
    /// Metric: a kind name (euclidean, spherical, hyperbolic-restricted),
    /// inline JSON like {"kind":"radial-table","table":[[s,value],...]},
    /// or a path to such a JSON file [default: euclidean]
    #[arg(long, value_name = "SPEC")]
    metric: Option<String>,
}

#[derive(Args)]
struct RadialArgs {
    /// Inner radius R of the target annulus A(R,1)
    #[arg(long = "R")]
    big_r: f64,
    /// Family parameter (mutually exclusive with --r-target)
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Source inner radius to solve the family parameter for
    #[arg(long)]
    r_target: Option<f64>,
    #[command(flatten)]
    metric: MetricArg,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dump the sampled (s, q(s)) table as CSV
    #[arg(long, value_name = "FILE")]
    dump_q: Option<PathBuf>,
}

#[derive(Args)]
struct NitscheRadiusArgs {
    /// Inner radius R of the target annulus A(R,1)
    #[arg(long = "R")]
    big_r: f64,
    #[command(flatten)]
    metric: MetricArg,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MinimizeArgs {
    /// Inner radius of the source annulus A(X,1)
    #[arg(long = "X-inner")]
    x_inner: f64,
    /// Inner radius of the target annulus A(Y,1)
    #[arg(long = "Y-inner")]
    y_inner: f64,
    #[command(flatten)]
    metric: MetricArg,
    /// Radial mesh rings [default: 64]
    #[arg(long)]
    nr: Option<usize>,
    /// Angular mesh nodes [default: 128]
    #[arg(long)]
    nt: Option<usize>,
    /// Cap on accepted descent steps [default: 20000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Gradient-norm stopping tolerance [default: 1e-7]
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of auxiliary randomized helpers [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Let boundary nodes slide along the target circles [default: true]
    #[arg(long, value_name = "BOOL")]
    boundary_sliding: Option<bool>,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Dump the final map as CSV (columns i,j,s,theta,re,im)
    #[arg(long, value_name = "FILE")]
    dump_map: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Map CSV to diagnose (a --dump-map file)
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    #[command(flatten)]
    metric: MetricArg,
    /// Collar width of the boundary Holder estimate [default: sized from the
    /// mesh]
    #[arg(long)]
    band: Option<f64>,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AdmissibilityArgs {
    /// Inner radius of the audited annulus
    #[arg(long)]
    inner: f64,
    /// Outer radius of the audited annulus
    #[arg(long)]
    outer: f64,
    #[command(flatten)]
    metric: MetricArg,
    /// Sampling resolution per dimension [default: 256]
    #[arg(long)]
    resolution: Option<usize>,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExploreArgs {
    /// Inner radius R of the target annulus A(R,1)
    #[arg(long = "R")]
    big_r: f64,
    #[command(flatten)]
    metric: MetricArg,
    /// Radial mesh rings of each probe [default: 48]
    #[arg(long)]
    nr: Option<usize>,
    /// Angular mesh nodes of each probe [default: 96]
    #[arg(long)]
    nt: Option<usize>,
    /// Per-probe cap on accepted descent steps [default: 20000]
    #[arg(long)]
    max_iter: Option<usize>,
    /// Per-probe gradient-norm stopping tolerance [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
    /// Bracket width at which the bisection stops [default: 0.01]
    #[arg(long)]
    bisect_tol: Option<f64>,
    /// Seed of auxiliary randomized helpers [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Let boundary nodes slide along the target circles [default: true]
    #[arg(long, value_name = "BOOL")]
    boundary_sliding: Option<bool>,
    /// Write the report envelope to this file
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; keys are the effective_config fields
    config: PathBuf,
}

enum CliError {
    Config(String),
    Numerical(String),
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    cap_worker_threads();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn cap_worker_threads() {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n >= 1 => {
            // Ignore failure: the pool may already exist in reentrant use.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: {THREADS_ENV}={raw} ignored (not a positive integer)"),
    }
}

/// Interpret a --metric value as inline JSON, a file path, or a kind name.
fn parse_metric_spec(raw: &str) -> Result<MetricSpec, CliError> {
    let trimmed = raw.trim();
    let parse_json = |text: &str, origin: &str| -> Result<MetricSpec, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("metric spec {origin}: {e}")))
    };
    if trimmed.starts_with('{') {
        return parse_json(trimmed, "(inline)");
    }
    if trimmed.ends_with(".json") || Path::new(trimmed).is_file() {
        let text = fs::read_to_string(trimmed)
            .map_err(|e| CliError::Config(format!("metric spec file '{trimmed}': {e}")))?;
        return parse_json(&text, &format!("file '{trimmed}'"));
    }
    Ok(MetricSpec::from_kind_name(trimmed))
}

fn metric_field(arg: &MetricArg) -> Result<Option<MetricSpec>, CliError> {
    arg.metric.as_deref().map(parse_metric_spec).transpose()
}

fn path_string(path: &Option<PathBuf>) -> Option<String> {
    path.as_ref().map(|p| p.display().to_string())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let cfg = match command {
        Command::Radial(a) => EffectiveConfig {
            command: Some("radial".to_string()),
            metric: metric_field(&a.metric)?,
            big_r: Some(a.big_r),
            gamma: a.gamma,
            r_target: a.r_target,
            out: path_string(&a.out),
            dump_q: path_string(&a.dump_q),
            ..EffectiveConfig::default()
        },
        Command::NitscheRadius(a) => EffectiveConfig {
            command: Some("nitsche-radius".to_string()),
            metric: metric_field(&a.metric)?,
            big_r: Some(a.big_r),
            out: path_string(&a.out),
            ..EffectiveConfig::default()
        },
        Command::Minimize(a) => EffectiveConfig {
            command: Some("minimize".to_string()),
            metric: metric_field(&a.metric)?,
            x_inner: Some(a.x_inner),
            y_inner: Some(a.y_inner),
            nr: a.nr,
            nt: a.nt,
            max_iter: a.max_iter,
            tol: a.tol,
            seed: a.seed,
            boundary_sliding: a.boundary_sliding,
            out: path_string(&a.out),
            dump_map: path_string(&a.dump_map),
            ..EffectiveConfig::default()
        },
        Command::Diagnose(a) => EffectiveConfig {
            command: Some("diagnose".to_string()),
            metric: metric_field(&a.metric)?,
            map: Some(a.map.display().to_string()),
            band: a.band,
            out: path_string(&a.out),
            ..EffectiveConfig::default()
        },
        Command::Admissibility(a) => EffectiveConfig {
            command: Some("admissibility".to_string()),
            metric: metric_field(&a.metric)?,
            inner: Some(a.inner),
            outer: Some(a.outer),
            resolution: a.resolution,
            out: path_string(&a.out),
            ..EffectiveConfig::default()
        },
        Command::Explore(a) => EffectiveConfig {
            command: Some("explore".to_string()),
            metric: metric_field(&a.metric)?,
            big_r: Some(a.big_r),
            nr: a.nr,
            nt: a.nt,
            max_iter: a.max_iter,
            tol: a.tol,
            bisect_tol: a.bisect_tol,
            seed: a.seed,
            boundary_sliding: a.boundary_sliding,
            out: path_string(&a.out),
            ..EffectiveConfig::default()
        },
        Command::Run(a) => {
            let text = fs::read_to_string(&a.config).map_err(|e| {
                CliError::Config(format!("config file '{}': {e}", a.config.display()))
            })?;
            EffectiveConfig::from_json(&text)?
        }
    };
    execute(cfg.validated()?)
}

fn execute(cfg: EffectiveConfig) -> Result<(), CliError> {
    match cfg.command.as_deref().unwrap_or_default() {
        "nitsche-radius" => {
            let report = nitsche_radius_report(&cfg)?;
            emit(&cfg, &report)
        }
        "radial" => {
            let (report, map) = radial_report(&cfg)?;
            if let Some(path) = &cfg.dump_q {
                let family = map
                    .nitsche_family()
                    .expect("radial_report returns a radial-family member");
                let mut csv = String::from("s,q\n");
                for (s, q) in family.q_samples() {
                    let _ = writeln!(csv, "{s},{q}");
                }
                write_file(path, &csv)?;
            }
            emit(&cfg, &report)
        }
        "minimize" => {
            let (report, map) = minimize_report(&cfg)?;
            if let Some(path) = &cfg.dump_map {
                write_file(path, &map.to_csv())?;
            }
            let converged = report.converged;
            emit(&cfg, &report)?;
            if !converged {
                return Err(CliError::Numerical(
                    "minimization stopped before meeting the gradient tolerance \
                     (partial report emitted; see its flags)"
                        .to_string(),
                ));
            }
            Ok(())
        }
        "diagnose" => {
            let path = cfg.map.as_deref().expect("validated config has map");
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("map file '{path}': {e}")))?;
            let map = DiscreteMap::from_csv(&text)
                .map_err(|e| CliError::Config(format!("map file '{path}': {e}")))?;
            let report = diagnose_report(&cfg, &map)?;
            emit(&cfg, &report)
        }
        "admissibility" => {
            let report = admissibility_cli_report(&cfg)?;
            emit(&cfg, &report)
        }
        "explore" => {
            let report = explore_report(&cfg)?;
            emit(&cfg, &report)
        }
        other => Err(CliError::Config(format!("unknown command '{other}'"))),
    }
}

/// Print the report body to stdout; with `out` set, also write the
/// timestamped envelope to disk.
fn emit<T: Serialize>(cfg: &EffectiveConfig, report: &T) -> Result<(), CliError> {
    use std::io::Write as _;
    let body = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Numerical(format!("report serialization failed: {e}")))?;
    if let Err(e) = writeln!(std::io::stdout(), "{body}") {
        // A closed pipe (e.g. `| head`) is not an error worth reporting.
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            return Err(CliError::Numerical(format!("writing stdout failed: {e}")));
        }
    }
    if let Some(path) = &cfg.out {
        let envelope = serde_json::to_string_pretty(&envelope_now(report))
            .map_err(|e| CliError::Numerical(format!("report serialization failed: {e}")))?;
        write_file(path, &(envelope + "\n"))?;
    }
    Ok(())
}

fn write_file(path: &str, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Numerical(format!("writing '{path}' failed: {e}")))
}
