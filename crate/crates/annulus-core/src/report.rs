//! Run configuration and serializable run reports.
//!
//! The command-line front end and the test suite share one configuration
//! schema, [`EffectiveConfig`], and one set of report bodies. A config is
//! parsed strictly — unknown keys, type mismatches, and out-of-range values
//! are all rejected with the offending field named — then normalized by
//! [`EffectiveConfig::validated`], which applies the documented defaults.
//! Every report embeds the resulting effective configuration, so each
//! artifact records exactly how it was produced.
//!
//! Reports are deterministic: identical configurations (including seeds)
//! serialize to byte-identical JSON regardless of worker-thread count.
//! Wall-clock metadata lives outside the report body in [`ReportEnvelope`],
//! keeping the body reproducible.
//!
//! The `*_report` functions assemble one report per command from the
//! underlying modules; file placement and process exit codes stay in the
//! binary crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, BoundarySide, DiagnosticsError, HolderReport, HopfFit, QCReport};
use crate::energy::{dirichlet_energy, DiscreteMap, EnergyError, EnergyReport};
use crate::geometry::{make_annulus, GeometryError};
use crate::metrics::{admissibility_report, AdmissibilityReport, Domain, Metric, MetricError};
use crate::radial::{
    gamma_diamond_detailed, gamma_for_target, nitsche_map, r_of_gamma, Profile, RadialError,
};
use crate::solver::{
    estimate_nitsche_radius_variational, init_map, minimize, InitKind, ProbeRecord, SolverConfig,
    SolverError,
};

/// Errors raised while parsing configuration or assembling reports.
///
/// [`ReportError::is_config`] separates misuse (bad or contradictory
/// parameters) from numerical failure; the command-line front end maps the
/// former to exit code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

impl ReportError {
    /// True for configuration mistakes (reject with usage-style diagnostics),
    /// false for numerical failures discovered while computing.
    pub fn is_config(&self) -> bool {
        matches!(self, ReportError::Config(_) | ReportError::Metric(_))
    }
}

// ---------------------------------------------------------------------------
// Metric specification
// ---------------------------------------------------------------------------

/// JSON description of a metric: `{"kind": "...", "params": {...},
/// "table": [[s, value], ...]}`.
///
/// `kind` selects one of the built-in densities; `table` supplies the
/// sampled radial profile for the `radial-table` kind and must be omitted
/// otherwise. No current kind takes parameters, so a non-empty `params`
/// object is rejected rather than ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

impl MetricSpec {
    /// Spec with the given kind and no parameters or table.
    pub fn from_kind_name(kind: &str) -> Self {
        MetricSpec {
            kind: kind.to_string(),
            params: None,
            table: None,
        }
    }

    /// The default metric: the flat density `ρ ≡ 1`.
    pub fn euclidean() -> Self {
        Self::from_kind_name("euclidean")
    }

    /// Instantiate the metric this spec describes.
    pub fn build(&self) -> Result<Metric, ReportError> {
        if let Some(params) = &self.params {
            if !params.is_empty() {
                let keys: Vec<&str> = params.keys().map(String::as_str).collect();
                return Err(ReportError::Config(format!(
                    "metric.params: kind '{}' accepts no parameters (got: {})",
                    self.kind,
                    keys.join(", ")
                )));
            }
        }
        Ok(Metric::from_kind(&self.kind, self.table.as_deref())?)
    }
}

// ---------------------------------------------------------------------------
// Effective configuration
// ---------------------------------------------------------------------------

/// One run's full parameter set: the command, the metric, and the numeric
/// parameters, with absent values filled from documented defaults by
/// [`EffectiveConfig::validated`].
///
/// The same struct is the on-disk config schema (strict: unknown keys are
/// rejected) and the `effective_config` block embedded in every report.
/// Field names follow the command-line flags; `X_inner`, `Y_inner`, and `R`
/// keep their mathematical capitalization in JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    /// One of `radial`, `nitsche-radius`, `minimize`, `diagnose`,
    /// `admissibility`, `explore`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    /// Inner radius of the source annulus `A(X_inner, 1)`.
    #[serde(rename = "X_inner", default, skip_serializing_if = "Option::is_none")]
    pub x_inner: Option<f64>,
    /// Inner radius of the target annulus `A(Y_inner, 1)`.
    #[serde(rename = "Y_inner", default, skip_serializing_if = "Option::is_none")]
    pub y_inner: Option<f64>,
    /// Inner radius of the target annulus for the radial-family commands.
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub big_r: Option<f64>,
    /// Family parameter γ of the radial map (mutually exclusive with
    /// `r_target`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Source inner radius to solve γ for (mutually exclusive with `gamma`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_target: Option<f64>,
    /// Inner radius of the admissibility domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    /// Outer radius of the admissibility domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
    /// Radial mesh rings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nr: Option<usize>,
    /// Angular mesh nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    /// Cap on accepted descent steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    /// Gradient-norm stopping tolerance of the descent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Bracket width at which the explorer's bisection stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisect_tol: Option<f64>,
    /// Collar width for the boundary Hölder estimate; sized from the mesh
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<f64>,
    /// Seed of auxiliary randomized helpers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Allow boundary nodes to slide along the target circles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_sliding: Option<bool>,
    /// Sampling resolution per dimension of the admissibility report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    /// Path of the map CSV consumed by `diagnose`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    /// Path the report envelope is written to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Path the final map is dumped to as CSV (`i,j,s,theta,re,im`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_map: Option<String>,
    /// Path the sampled `(s, q(s))` table is dumped to as CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_q: Option<String>,
}

fn config_err<T>(message: impl Into<String>) -> Result<T, ReportError> {
    Err(ReportError::Config(message.into()))
}

impl EffectiveConfig {
    /// Parse a JSON configuration strictly. Unknown keys and type
    /// mismatches are rejected with the field named; ranges are checked by
    /// [`EffectiveConfig::validated`].
    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        let mut de = serde_json::Deserializer::from_str(text);
        match serde_path_to_error::deserialize::<_, EffectiveConfig>(&mut de) {
            Ok(cfg) => Ok(cfg),
            Err(e) => {
                let path = e.path().to_string();
                let inner = e.into_inner();
                if path == "." {
                    config_err(format!("config: {inner}"))
                } else {
                    config_err(format!("config field {path}: {inner}"))
                }
            }
        }
    }

    /// Names of the fields the user actually set, as they appear in JSON.
    fn set_fields(&self) -> Vec<&'static str> {
        let mut set = Vec::new();
        let mut mark = |present: bool, name: &'static str| {
            if present {
                set.push(name);
            }
        };
        mark(self.metric.is_some(), "metric");
        mark(self.x_inner.is_some(), "X_inner");
        mark(self.y_inner.is_some(), "Y_inner");
        mark(self.big_r.is_some(), "R");
        mark(self.gamma.is_some(), "gamma");
        mark(self.r_target.is_some(), "r_target");
        mark(self.inner.is_some(), "inner");
        mark(self.outer.is_some(), "outer");
        mark(self.nr.is_some(), "nr");
        mark(self.nt.is_some(), "nt");
        mark(self.max_iter.is_some(), "max_iter");
        mark(self.tol.is_some(), "tol");
        mark(self.bisect_tol.is_some(), "bisect_tol");
        mark(self.band.is_some(), "band");
        mark(self.seed.is_some(), "seed");
        mark(self.boundary_sliding.is_some(), "boundary_sliding");
        mark(self.resolution.is_some(), "resolution");
        mark(self.map.is_some(), "map");
        mark(self.out.is_some(), "out");
        mark(self.dump_map.is_some(), "dump_map");
        mark(self.dump_q.is_some(), "dump_q");
        set
    }

    /// Range checks over every present field, command-independent so a bad
    /// value is reported even when the command is missing or wrong.
    fn check_ranges(&self) -> Result<(), ReportError> {
        let unit_interval = |name: &str, v: Option<f64>| -> Result<(), ReportError> {
            match v {
                Some(x) if x.is_finite() && x > 0.0 && x < 1.0 => Ok(()),
                Some(_) => config_err(format!("{name} must lie in (0,1)")),
                None => Ok(()),
            }
        };
        unit_interval("R", self.big_r)?;
        unit_interval("X_inner", self.x_inner)?;
        unit_interval("Y_inner", self.y_inner)?;
        unit_interval("r_target", self.r_target)?;
        if let Some(x) = self.inner {
            if !(x.is_finite() && x > 0.0) {
                return config_err("inner must be positive");
            }
        }
        if let Some(x) = self.outer {
            if !(x.is_finite() && x > 0.0) {
                return config_err("outer must be positive");
            }
        }
        if let (Some(i), Some(o)) = (self.inner, self.outer) {
            if o <= i {
                return config_err("outer must exceed inner");
            }
        }
        if let Some(g) = self.gamma {
            if !g.is_finite() {
                return config_err("gamma must be finite");
            }
        }
        if matches!(self.nr, Some(n) if n < 4) {
            return config_err("nr must be at least 4");
        }
        if matches!(self.nt, Some(n) if n < 8) {
            return config_err("nt must be at least 8");
        }
        if matches!(self.max_iter, Some(0)) {
            return config_err("max_iter must be at least 1");
        }
        let positive = |name: &str, v: Option<f64>| -> Result<(), ReportError> {
            match v {
                Some(x) if x.is_finite() && x > 0.0 => Ok(()),
                Some(_) => config_err(format!("{name} must be positive")),
                None => Ok(()),
            }
        };
        positive("tol", self.tol)?;
        positive("bisect_tol", self.bisect_tol)?;
        positive("band", self.band)?;
        if matches!(self.resolution, Some(n) if n < 16) {
            return config_err("resolution must be at least 16");
        }
        Ok(())
    }

    /// Validate ranges, reject fields foreign to the command, check the
    /// command's required parameters, and fill the documented defaults.
    ///
    /// The result is the self-describing configuration embedded in reports.
    pub fn validated(mut self) -> Result<Self, ReportError> {
        self.check_ranges()?;
        let Some(command) = self.command.clone() else {
            return config_err("command is required");
        };
        let allowed: &[&str] = match command.as_str() {
            "nitsche-radius" => &["metric", "R", "out"],
            "radial" => &["metric", "R", "gamma", "r_target", "out", "dump_q"],
            "minimize" => &[
                "metric",
                "X_inner",
                "Y_inner",
                "nr",
                "nt",
                "max_iter",
                "tol",
                "seed",
                "boundary_sliding",
                "out",
                "dump_map",
            ],
            "diagnose" => &["metric", "map", "band", "out"],
            "admissibility" => &["metric", "inner", "outer", "resolution", "out"],
            "explore" => &[
                "metric",
                "R",
                "nr",
                "nt",
                "max_iter",
                "tol",
                "bisect_tol",
                "seed",
                "boundary_sliding",
                "out",
            ],
            other => {
                return config_err(format!(
                    "unknown command '{other}' (expected radial, nitsche-radius, minimize, \
                     diagnose, admissibility, or explore)"
                ))
            }
        };
        for field in self.set_fields() {
            if !allowed.contains(&field) {
                return config_err(format!(
                    "{field} is not a parameter of command '{command}'"
                ));
            }
        }

        let require = |present: bool, name: &str| -> Result<(), ReportError> {
            if present {
                Ok(())
            } else {
                config_err(format!("{name} is required by command '{command}'"))
            }
        };
        match command.as_str() {
            "nitsche-radius" | "explore" => require(self.big_r.is_some(), "R")?,
            "radial" => {
                require(self.big_r.is_some(), "R")?;
                match (self.gamma.is_some(), self.r_target.is_some()) {
                    (true, true) => {
                        return config_err("gamma and r_target are mutually exclusive")
                    }
                    (false, false) => {
                        return config_err("radial needs either gamma or r_target")
                    }
                    _ => {}
                }
            }
            "minimize" => {
                require(self.x_inner.is_some(), "X_inner")?;
                require(self.y_inner.is_some(), "Y_inner")?;
            }
            "diagnose" => require(self.map.is_some(), "map")?,
            "admissibility" => {
                require(self.inner.is_some(), "inner")?;
                require(self.outer.is_some(), "outer")?;
            }
            _ => unreachable!("command list checked above"),
        }

        if self.metric.is_none() {
            self.metric = Some(MetricSpec::euclidean());
        }
        match command.as_str() {
            "minimize" => {
                self.nr.get_or_insert(64);
                self.nt.get_or_insert(128);
                self.max_iter.get_or_insert(20_000);
                self.tol.get_or_insert(1e-7);
                self.seed.get_or_insert(0);
                self.boundary_sliding.get_or_insert(true);
            }
            "explore" => {
                self.nr.get_or_insert(48);
                self.nt.get_or_insert(96);
                self.max_iter.get_or_insert(20_000);
                self.tol.get_or_insert(1e-6);
                self.bisect_tol.get_or_insert(0.01);
                self.seed.get_or_insert(0);
                self.boundary_sliding.get_or_insert(true);
            }
            "admissibility" => {
                self.resolution.get_or_insert(256);
            }
            _ => {}
        }
        Ok(self)
    }

    /// Instantiate the configured metric (the default when none was given).
    pub fn build_metric(&self) -> Result<Metric, ReportError> {
        match &self.metric {
            Some(spec) => spec.build(),
            None => MetricSpec::euclidean().build(),
        }
    }

    fn solver_config(&self) -> SolverConfig {
        let defaults = SolverConfig::default();
        SolverConfig {
            max_iterations: self.max_iter.unwrap_or(defaults.max_iterations),
            gradient_tolerance: self.tol.unwrap_or(defaults.gradient_tolerance),
            boundary_sliding: self.boundary_sliding.unwrap_or(defaults.boundary_sliding),
            seed: self.seed.unwrap_or(defaults.seed),
            ..defaults
        }
    }
}

fn req<T: Copy>(value: Option<T>, name: &str) -> Result<T, ReportError> {
    value.ok_or_else(|| ReportError::Config(format!("{name} is required")))
}

// ---------------------------------------------------------------------------
// Report bodies
// ---------------------------------------------------------------------------

/// Report of the `nitsche-radius` command: the critical inner radius and the
/// critical family constant of the configured radial metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NitscheRadiusReport {
    pub effective_config: EffectiveConfig,
    pub r_diamond: f64,
    pub gamma_diamond: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Report of the `radial` command: one member of the radial map family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadialReport {
    pub effective_config: EffectiveConfig,
    /// Family parameter of the reported member.
    pub gamma: f64,
    /// Source inner radius `r(γ) = q(R)` of the member.
    pub r_gamma: f64,
    /// Critical family constant for this profile and target.
    pub gamma_diamond: f64,
    /// Critical inner radius for this profile and target.
    pub r_diamond: f64,
    /// Hash of the sampled `q` table, for reproducibility checks.
    pub q_table_checksum: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Report of the `minimize` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub effective_config: EffectiveConfig,
    /// Whether the projected gradient norm reached the tolerance.
    pub converged: bool,
    /// Accepted descent steps.
    pub iterations: usize,
    pub final_gradient_norm: f64,
    /// Sup norm of the discrete tension field at the final iterate.
    pub tension_residual: f64,
    /// Energy audit of the final iterate.
    pub energy: EnergyReport,
    /// Quadratic-differential fit of the final iterate.
    pub hopf: HopfFit,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Report of the `diagnose` command: energy, Hopf fit, quasiconformality
/// certificate, and boundary Hölder estimates of a dumped map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub effective_config: EffectiveConfig,
    pub energy: EnergyReport,
    pub hopf: HopfFit,
    pub qc: QCReport,
    pub holder_inner: HolderReport,
    pub holder_outer: HolderReport,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Report of the `explore` command: the variational estimate of the critical
/// inner radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreReport {
    pub effective_config: EffectiveConfig,
    pub r_estimate: f64,
    /// Final bracket: minimizers fold at `bracket.0`, stay diffeomorphic at
    /// `bracket.1`.
    pub bracket: (f64, f64),
    pub probes: Vec<ProbeRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Report of the `admissibility` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityCliReport {
    pub effective_config: EffectiveConfig,
    pub admissibility: AdmissibilityReport,
}

/// Wrapper written to `--out` files: wall-clock metadata stays here so the
/// `report` body is byte-reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEnvelope<T> {
    /// Unix timestamp (seconds) of report creation.
    pub generated_at: u64,
    pub report: T,
}

/// Wrap a report body with the current wall-clock time.
pub fn envelope_now<T>(report: T) -> ReportEnvelope<T> {
    let generated_at = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    ReportEnvelope {
        generated_at,
        report,
    }
}

// ---------------------------------------------------------------------------
// Report assembly
// ---------------------------------------------------------------------------

fn radial_profile(m: &Metric) -> Result<Profile, ReportError> {
    Profile::from_metric(m).ok_or_else(|| {
        ReportError::Config(format!(
            "metric: the radial family needs a rotationally symmetric density \
             (euclidean or radial-table), got '{}'",
            m.kind_name()
        ))
    })
}

/// Assemble the `nitsche-radius` report for a validated configuration.
pub fn nitsche_radius_report(cfg: &EffectiveConfig) -> Result<NitscheRadiusReport, ReportError> {
    let big_r = req(cfg.big_r, "R")?;
    let metric = cfg.build_metric()?;
    let profile = radial_profile(&metric)?;
    let gd = gamma_diamond_detailed(&profile, big_r);
    let r_diamond = r_of_gamma(&profile, gd.gamma, big_r)?;
    Ok(NitscheRadiusReport {
        effective_config: cfg.clone(),
        r_diamond,
        gamma_diamond: gd.gamma,
        warnings: gd.warnings,
    })
}

/// Assemble the `radial` report; also returns the map so callers can dump
/// its `q` table.
pub fn radial_report(
    cfg: &EffectiveConfig,
) -> Result<(RadialReport, crate::radial::AnalyticMap), ReportError> {
    let big_r = req(cfg.big_r, "R")?;
    let metric = cfg.build_metric()?;
    let profile = radial_profile(&metric)?;
    let gamma = match (cfg.gamma, cfg.r_target) {
        (Some(g), None) => g,
        (None, Some(rt)) => gamma_for_target(&profile, big_r, rt)?,
        (Some(_), Some(_)) => return config_err("gamma and r_target are mutually exclusive"),
        (None, None) => return config_err("radial needs either gamma or r_target"),
    };
    let map = nitsche_map(&profile, gamma, big_r)?;
    let family = map
        .nitsche_family()
        .expect("nitsche_map returns a radial-family member");
    let gd = gamma_diamond_detailed(&profile, big_r);
    let r_diamond = r_of_gamma(&profile, gd.gamma, big_r)?;
    let mut warnings = gd.warnings;
    warnings.extend(family.warnings().iter().cloned());
    let report = RadialReport {
        effective_config: cfg.clone(),
        gamma: family.gamma(),
        r_gamma: family.r_gamma(),
        gamma_diamond: gd.gamma,
        r_diamond,
        q_table_checksum: family.q_table_checksum(),
        warnings,
    };
    Ok((report, map))
}

/// Assemble the `minimize` report; also returns the final map so callers
/// can dump it as CSV.
pub fn minimize_report(
    cfg: &EffectiveConfig,
) -> Result<(MinimizeReport, DiscreteMap), ReportError> {
    let x_inner = req(cfg.x_inner, "X_inner")?;
    let y_inner = req(cfg.y_inner, "Y_inner")?;
    let nr = req(cfg.nr, "nr")?;
    let nt = req(cfg.nt, "nt")?;
    let metric = cfg.build_metric()?;
    let x = make_annulus(x_inner, 1.0)?;
    let y = make_annulus(y_inner, 1.0)?;
    let solver_cfg = cfg.solver_config();
    let init = init_map(&x, &y, nr, nt, InitKind::LogLinearRadial)?;
    let result = minimize(&x, &y, &metric, &solver_cfg, &init)?;
    let energy = dirichlet_energy(&result.map, &metric)?;
    let field = diagnostics::hopf_field(&result.map, &metric)?;
    let hopf = diagnostics::hopf_fit(&field, result.map.mesh())?;
    let report = MinimizeReport {
        effective_config: cfg.clone(),
        converged: result.converged,
        iterations: result.iterations,
        final_gradient_norm: result.final_gradient_norm,
        tension_residual: result.tension_residual,
        energy,
        hopf,
        flags: result.flags,
    };
    Ok((report, result.map))
}

/// Collar width used for the boundary Hölder estimate: the user's choice
/// when given, otherwise a quarter of the annulus, widened to clear the
/// mesh-scale floor on coarse meshes and capped at the estimator's maximum.
pub fn holder_band(map: &DiscreteMap, side: BoundarySide, user: Option<f64>) -> f64 {
    if let Some(band) = user {
        return band;
    }
    let annulus = map.mesh().annulus();
    let width = annulus.outer() - annulus.inner();
    let floor = diagnostics::holder_band_floor(map, side);
    (0.25 * width).max(1.1 * floor).min(0.45 * width)
}

/// Assemble the `diagnose` report for an already loaded map.
pub fn diagnose_report(
    cfg: &EffectiveConfig,
    map: &DiscreteMap,
) -> Result<DiagnoseReport, ReportError> {
    let metric = cfg.build_metric()?;
    let energy = dirichlet_energy(map, &metric)?;
    let field = diagnostics::hopf_field(map, &metric)?;
    let hopf = diagnostics::hopf_fit(&field, map.mesh())?;
    let x_inner = map.mesh().annulus().inner();
    let qc = diagnostics::qc_report(map, &metric, hopf.c.norm(), x_inner)?;
    let holder_inner = diagnostics::holder_exponent(
        map,
        BoundarySide::Inner,
        holder_band(map, BoundarySide::Inner, cfg.band),
    )?;
    let holder_outer = diagnostics::holder_exponent(
        map,
        BoundarySide::Outer,
        holder_band(map, BoundarySide::Outer, cfg.band),
    )?;
    let mut warnings = Vec::new();
    if map.mixed_jacobian() {
        warnings.push("map carries mixed Jacobian signs; it is not a diffeomorphism".to_string());
    }
    if energy.min_jacobian <= 0.0 {
        warnings.push(format!(
            "minimum discrete Jacobian is {:.6e}; orientation degenerates somewhere",
            energy.min_jacobian
        ));
    }
    Ok(DiagnoseReport {
        effective_config: cfg.clone(),
        energy,
        hopf,
        qc,
        holder_inner,
        holder_outer,
        warnings,
    })
}

/// Assemble the `explore` report.
pub fn explore_report(cfg: &EffectiveConfig) -> Result<ExploreReport, ReportError> {
    let big_r = req(cfg.big_r, "R")?;
    let nr = req(cfg.nr, "nr")?;
    let nt = req(cfg.nt, "nt")?;
    let bisect_tol = req(cfg.bisect_tol, "bisect_tol")?;
    let metric = cfg.build_metric()?;
    let solver_cfg = cfg.solver_config();
    let result =
        estimate_nitsche_radius_variational(&metric, big_r, nr, nt, &solver_cfg, bisect_tol)?;
    Ok(ExploreReport {
        effective_config: cfg.clone(),
        r_estimate: result.r_estimate,
        bracket: result.bracket,
        probes: result.probes,
        flags: result.flags,
    })
}

/// Assemble the `admissibility` report.
pub fn admissibility_cli_report(
    cfg: &EffectiveConfig,
) -> Result<AdmissibilityCliReport, ReportError> {
    let inner = req(cfg.inner, "inner")?;
    let outer = req(cfg.outer, "outer")?;
    let resolution = req(cfg.resolution, "resolution")?;
    let metric = cfg.build_metric()?;
    let domain = Domain::Annulus(make_annulus(inner, outer)?);
    Ok(AdmissibilityCliReport {
        effective_config: cfg.clone(),
        admissibility: admissibility_report(&metric, &domain, resolution),
    })
}
