//! Variational minimization of the Dirichlet energy over discrete
//! annulus-to-annulus maps with sliding boundary values.
//!
//! The feasible set fixes the image circles but not the boundary
//! correspondence: interior nodes move freely in the plane, while nodes on
//! the two boundary rings stay on the target circles `|w| = inner(Y)` and
//! `|w| = 1`, sliding along them when `boundary_sliding` is enabled. The
//! optimizer is projected gradient descent with a Barzilai–Borwein step
//! length and Armijo backtracking; every accepted step strictly decreases
//! the energy, so the recorded history is monotone.
//!
//! The module also hosts the discrete tension field
//! `τ(f) = f_zz̄ + (∂_w log ρ²)(f) · f_z f_z̄`, whose sup norm over interior
//! nodes measures how far a map is from being ρ-harmonic, and a bisection
//! explorer that estimates the critical inner radius below which minimizers
//! stop being diffeomorphisms, using the Jacobian-collapse signature of the
//! critical transition.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{DiscreteMap, EnergyError, MeshStencils};
use crate::geometry::{make_annulus, make_polar_mesh, Annulus, GeometryError, PolarMesh};
use crate::metrics::{self, Metric};
use crate::Complex64;

/// Errors from solver configuration, initialization, and hard failures of
/// the inner energy evaluations.
#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("source annulus must be normalized to outer radius 1, got outer = {outer}")]
    SourceNotNormalized { outer: f64 },
    #[error("target annulus must be normalized to outer radius 1, got outer = {outer}")]
    TargetNotNormalized { outer: f64 },
    #[error(
        "identity initialization requires identical annuli, got A({x_inner}, {x_outer}) and A({y_inner}, {y_outer})"
    )]
    IdentityNeedsEqualAnnuli {
        x_inner: f64,
        x_outer: f64,
        y_inner: f64,
        y_outer: f64,
    },
    #[error("initial map must be orientation-preserving with positive Jacobian: {reason}")]
    BadInit { reason: String },
    #[error("initial map lives on A({map_inner}, {map_outer}) but the source is A({x_inner}, {x_outer})")]
    MeshMismatch {
        map_inner: f64,
        map_outer: f64,
        x_inner: f64,
        x_outer: f64,
    },
    #[error("radius explorer aborted with partial bracket [{lo}, {hi}]: {reason}")]
    ExplorerAborted { lo: f64, hi: f64, reason: String },
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parameters of the projected gradient descent loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Hard cap on accepted descent steps.
    pub max_iterations: usize,
    /// Stop when the projected gradient's l² norm falls below this.
    pub gradient_tolerance: f64,
    /// Step length of the first iteration (later ones use Barzilai–Borwein).
    pub initial_step: f64,
    /// Backtracking shrink factor, in (0, 1).
    pub shrink: f64,
    /// Armijo sufficient-decrease constant, in (0, 1).
    pub sufficient_decrease: f64,
    /// Allow boundary nodes to slide along the target circles.
    pub boundary_sliding: bool,
    /// Seed for auxiliary randomized helpers; the descent loop itself is
    /// deterministic and never draws from it.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 20_000,
            gradient_tolerance: 1e-7,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            boundary_sliding: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), SolverError> {
        let fail = |reason: &str| {
            Err(SolverError::InvalidConfig {
                reason: reason.to_string(),
            })
        };
        if self.max_iterations == 0 {
            return fail("max_iterations must be at least 1");
        }
        if !(self.gradient_tolerance > 0.0) {
            return fail("gradient_tolerance must be positive");
        }
        if !(self.initial_step > 0.0) {
            return fail("initial_step must be positive");
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return fail("shrink must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return fail("sufficient_decrease must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Outcome of a minimization run.
#[derive(Debug)]
pub struct SolveResult {
    /// The final iterate.
    pub map: DiscreteMap,
    /// Energy after the initial projection and after every accepted step;
    /// non-increasing by the line-search guarantee.
    pub energy_history: Vec<f64>,
    /// True when the projected gradient norm reached `gradient_tolerance`.
    pub converged: bool,
    /// Sup norm of the discrete tension field over interior nodes.
    pub tension_residual: f64,
    /// Number of accepted descent steps.
    pub iterations: usize,
    /// Projected gradient norm at the final iterate.
    pub final_gradient_norm: f64,
    /// Diagnostics: Jacobian sign flips, line-search stalls, and similar
    /// events observed during the run.
    pub flags: Vec<String>,
}

/// Choice of initial map for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// `s e^{it} ↦ s^β e^{it}` with `β = log inner(Y) / log inner(X)`;
    /// matches the inner circles and fixes the outer one, degree 1.
    LogLinearRadial,
    /// Node coordinates verbatim; requires `X = Y`.
    Identity,
}

const NORMALIZATION_TOL: f64 = 1e-12;

fn check_normalized(x: &Annulus, y: &Annulus) -> Result<(), SolverError> {
    if (x.outer() - 1.0).abs() > NORMALIZATION_TOL {
        return Err(SolverError::SourceNotNormalized { outer: x.outer() });
    }
    if (y.outer() - 1.0).abs() > NORMALIZATION_TOL {
        return Err(SolverError::TargetNotNormalized { outer: y.outer() });
    }
    Ok(())
}

/// Builds the initial discrete map from `X` to `Y` on an `nr × nt` mesh.
pub fn init_map(
    x: &Annulus,
    y: &Annulus,
    nr: usize,
    nt: usize,
    kind: InitKind,
) -> Result<DiscreteMap, SolverError> {
    check_normalized(x, y)?;
    let mesh = make_polar_mesh(*x, nr, nt)?;
    let map = match kind {
        InitKind::LogLinearRadial => {
            let beta = y.inner().ln() / x.inner().ln();
            DiscreteMap::from_fn(&mesh, |z| {
                let s = z.norm();
                z * (s.powf(beta) / s)
            })?
        }
        InitKind::Identity => {
            if (x.inner() - y.inner()).abs() > NORMALIZATION_TOL {
                return Err(SolverError::IdentityNeedsEqualAnnuli {
                    x_inner: x.inner(),
                    x_outer: x.outer(),
                    y_inner: y.inner(),
                    y_outer: y.outer(),
                });
            }
            DiscreteMap::from_fn(&mesh, |z| z)?
        }
    };
    Ok(map)
}

/// Snaps the two boundary rings onto the target circles (chord step followed
/// by radial projection).
fn project_boundary(values: &mut Array2<Complex64>, mesh: &PolarMesh, y: &Annulus) {
    let nr = mesh.n_radial();
    for (i, radius) in [(0, y.inner()), (nr - 1, 1.0)] {
        for j in 0..mesh.n_angular() {
            let w = values[[i, j]];
            let norm = w.norm();
            values[[i, j]] = if norm > 0.0 {
                w * (radius / norm)
            } else {
                Complex64::from_polar(radius, mesh.angle(j))
            };
        }
    }
}

/// Projects the gradient onto the feasible directions: interior nodes are
/// free; boundary nodes keep only the component tangent to their circle, or
/// none at all when sliding is disabled.
fn project_direction(
    g: &Array2<Complex64>,
    values: &Array2<Complex64>,
    boundary_sliding: bool,
) -> Array2<Complex64> {
    let (nr, nt) = g.dim();
    let mut d = g.clone();
    for i in [0, nr - 1] {
        for j in 0..nt {
            if boundary_sliding {
                let w = values[[i, j]];
                let n = w / w.norm();
                let radial = (g[[i, j]] * n.conj()).re;
                d[[i, j]] = g[[i, j]] - n * radial;
            } else {
                d[[i, j]] = Complex64::new(0.0, 0.0);
            }
        }
    }
    d
}

fn norm_sqr(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

/// Sup norm over interior nodes of the discrete tension field
/// `τ(f) = f_zz̄ + (∂_w log ρ²)(f) · f_z f_z̄`; zero exactly when the map is
/// ρ-harmonic.
pub fn tension_residual(map: &DiscreteMap, m: &Metric) -> Result<f64, SolverError> {
    let mesh = map.mesh();
    let (nr, nt) = (mesh.n_radial(), mesh.n_angular());
    if nr < 3 || nt < 4 {
        return Err(EnergyError::MeshTooSmall { nr, nt }.into());
    }
    let st = MeshStencils::new(mesh);
    let mixed = st.mixed_second(map.values());
    let (fz, fzb) = st.wirtinger_diag(map.values());
    let mut worst = 0.0_f64;
    for i in 1..nr - 1 {
        for j in 0..nt {
            let w = map.values()[[i, j]];
            let grad = metrics::grad_log_rho(m, w)
                .map_err(|source| EnergyError::MetricDomain { i, j, source })?;
            // ∂_w log ρ² is the conjugate of the complex gradient of log ρ².
            let tau = mixed[[i, j]] + grad.conj() * fz[[i, j]] * fzb[[i, j]];
            worst = worst.max(tau.norm());
        }
    }
    Ok(worst)
}

/// Minimizes the Dirichlet energy of maps from `X` to `(Y, ρ)` starting at
/// `init`, by projected gradient descent with backtracking.
///
/// A line search that cannot find an admissible descent step ends the run
/// with `converged = false` and a diagnostic flag; a Jacobian sign flip on an
/// accepted iterate is flagged and answered with a halved step, but the
/// iteration continues.
pub fn minimize(
    x: &Annulus,
    y: &Annulus,
    m: &Metric,
    cfg: &SolverConfig,
    init: &DiscreteMap,
) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    check_normalized(x, y)?;
    let mesh_ann = init.mesh().annulus();
    if (mesh_ann.inner() - x.inner()).abs() > NORMALIZATION_TOL
        || (mesh_ann.outer() - x.outer()).abs() > NORMALIZATION_TOL
    {
        return Err(SolverError::MeshMismatch {
            map_inner: mesh_ann.inner(),
            map_outer: mesh_ann.outer(),
            x_inner: x.inner(),
            x_outer: x.outer(),
        });
    }
    let mesh = init.mesh().clone();
    let st = MeshStencils::new(&mesh);
    let mut f = init.values().clone();
    project_boundary(&mut f, &mesh, y);
    {
        let jac = st.jacobian_diag(&f);
        let min_j = jac.iter().copied().fold(f64::INFINITY, f64::min);
        if min_j <= 0.0 {
            return Err(SolverError::BadInit {
                reason: format!("minimum discrete Jacobian is {min_j}"),
            });
        }
    }
    let mut energy = st.energy_parts(m, &f)?.0;
    let mut history = vec![energy];
    let mut flags: Vec<String> = Vec::new();
    let mut converged = false;
    let mut iterations = 0usize;
    let mut prev_step: Option<(Array2<Complex64>, Array2<Complex64>)> = None; // (s, d_prev)
    let mut flip_flagged = false;
    let mut halve_next: Option<f64> = None;
    let mut stall_count = 0usize;
    let mut gnorm = f64::INFINITY;

    for _ in 0..cfg.max_iterations {
        let g = st.gradient(m, &f)?;
        let d = project_direction(&g, &f, cfg.boundary_sliding);
        let d_norm_sqr = norm_sqr(&d);
        gnorm = d_norm_sqr.sqrt();
        if gnorm <= cfg.gradient_tolerance {
            converged = true;
            break;
        }
        // Barzilai–Borwein step from the previous accepted step and the
        // change of the projected gradient, clamped to a safe range.
        let mut alpha = match &prev_step {
            Some((s, d_prev)) => {
                let ss: f64 = norm_sqr(s);
                let sy: f64 = s
                    .iter()
                    .zip(d.iter().zip(d_prev.iter()))
                    .map(|(sv, (dv, dpv))| (sv * (dv - dpv).conj()).re)
                    .sum();
                if sy > 0.0 {
                    (ss / sy).clamp(1e-14, 1e6)
                } else {
                    cfg.initial_step
                }
            }
            None => cfg.initial_step,
        };
        if let Some(cap) = halve_next.take() {
            alpha = alpha.min(cap);
        }
        let mut accepted = None;
        while alpha >= 1e-16 {
            let mut trial = &f - &d.mapv(|v| v * alpha);
            project_boundary(&mut trial, &mesh, y);
            match st.energy_parts(m, &trial) {
                // Steps that leave the metric's domain are treated as
                // ordinary rejections: back off and retry.
                Err(_) => alpha *= cfg.shrink,
                Ok((e_trial, _)) => {
                    if e_trial <= energy - cfg.sufficient_decrease * alpha * d_norm_sqr {
                        accepted = Some((trial, e_trial, alpha));
                        break;
                    }
                    alpha *= cfg.shrink;
                }
            }
        }
        let Some((trial, e_trial, used_alpha)) = accepted else {
            flags.push(format!(
                "line search stalled after iteration {iterations}: no admissible descent step"
            ));
            break;
        };
        let step = &trial - &f;
        if (energy - e_trial).abs() <= 1e-15 * (1.0 + energy.abs()) {
            stall_count += 1;
        } else {
            stall_count = 0;
        }
        f = trial;
        energy = e_trial;
        history.push(energy);
        iterations += 1;
        prev_step = Some((step, d));
        let jac = st.jacobian_diag(&f);
        let min_j = jac.iter().copied().fold(f64::INFINITY, f64::min);
        if min_j <= 0.0 {
            if !flip_flagged {
                flags.push(format!("jacobian sign flip at iteration {iterations}"));
                flip_flagged = true;
            }
            halve_next = Some(used_alpha * 0.5);
        }
        if stall_count >= 8 {
            flags.push("energy progress reached machine precision".to_string());
            break;
        }
    }
    if !converged {
        // Refresh the gradient norm at the final iterate; the loop may have
        // exited right after an accepted step.
        let g = st.gradient(m, &f)?;
        let d = project_direction(&g, &f, cfg.boundary_sliding);
        gnorm = norm_sqr(&d).sqrt();
        if gnorm <= cfg.gradient_tolerance {
            converged = true;
        }
    }
    let map = DiscreteMap::from_values(&mesh, f)?;
    let tension = tension_residual(&map, m)?;
    Ok(SolveResult {
        map,
        energy_history: history,
        converged,
        tension_residual: tension,
        iterations,
        final_gradient_norm: gnorm,
        flags,
    })
}

/// A single probe of the radius explorer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeRecord {
    /// Candidate inner radius of the source annulus.
    pub r: f64,
    /// Whether the minimizer passed the diffeomorphism test.
    pub diffeo: bool,
    /// Minimum discrete Jacobian of the minimizer.
    pub min_jacobian: f64,
    /// Median discrete Jacobian, the scale against which collapse is judged.
    pub median_jacobian: f64,
    /// Final energy of the probe's minimizer.
    pub energy: f64,
    /// Whether the probe's inner solve met its gradient tolerance.
    pub converged: bool,
}

/// Result of the variational critical-radius search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreResult {
    /// Midpoint of the final bracket.
    pub r_estimate: f64,
    /// Bracket `(lo, hi)`: minimizers fold at `lo`, stay diffeomorphic at `hi`.
    pub bracket: (f64, f64),
    /// All probes in the order they were run.
    pub probes: Vec<ProbeRecord>,
    /// Events worth surfacing (bracket trouble, non-converged probes).
    pub flags: Vec<String>,
}

/// Fraction of the median Jacobian below which the minimum Jacobian counts
/// as a boundary collapse rather than discretization noise.
const JACOBIAN_COLLAPSE_FRACTION: f64 = 1e-3;

fn probe_radius(
    m: &Metric,
    r: f64,
    big_r: f64,
    nr: usize,
    nt: usize,
    cfg: &SolverConfig,
) -> Result<ProbeRecord, SolverError> {
    let x = make_annulus(r, 1.0)?;
    let y = make_annulus(big_r, 1.0)?;
    let init = init_map(&x, &y, nr, nt, InitKind::LogLinearRadial)?;
    let result = minimize(&x, &y, m, cfg, &init)?;
    let st = MeshStencils::new(result.map.mesh());
    let jac = st.jacobian_diag(result.map.values());
    let mut sorted: Vec<f64> = jac.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let min_jacobian = sorted[0];
    let median_jacobian = sorted[sorted.len() / 2];
    let diffeo =
        median_jacobian > 0.0 && min_jacobian > JACOBIAN_COLLAPSE_FRACTION * median_jacobian;
    Ok(ProbeRecord {
        r,
        diffeo,
        min_jacobian,
        median_jacobian,
        energy: *result
            .energy_history
            .last()
            .expect("history always holds the initial energy"),
        converged: result.converged,
    })
}

/// Estimates, by bisection on the source inner radius `r`, the critical
/// radius below which minimizers from `A(r,1)` onto `(A(R,1), ρ)` stop being
/// diffeomorphisms. Each probe runs a full minimization and tests the
/// minimizer's Jacobian for boundary collapse.
pub fn estimate_nitsche_radius_variational(
    m: &Metric,
    big_r: f64,
    nr: usize,
    nt: usize,
    cfg: &SolverConfig,
    bisect_tol: f64,
) -> Result<ExploreResult, SolverError> {
    cfg.validate()?;
    if !(big_r > 0.0 && big_r < 1.0) {
        return Err(SolverError::InvalidConfig {
            reason: format!("target inner radius must lie in (0, 1), got {big_r}"),
        });
    }
    if !(bisect_tol > 0.0) {
        return Err(SolverError::InvalidConfig {
            reason: "bisection tolerance must be positive".to_string(),
        });
    }
    let mut probes = Vec::new();
    let mut flags = Vec::new();
    let mut run = |r: f64, probes: &mut Vec<ProbeRecord>| -> Result<bool, SolverError> {
        let record = probe_radius(m, r, big_r, nr, nt, cfg).map_err(|e| match e {
            SolverError::Energy(_) | SolverError::Geometry(_) => SolverError::ExplorerAborted {
                lo: 0.0,
                hi: big_r,
                reason: format!("probe at r = {r} failed: {e}"),
            },
            other => other,
        })?;
        let diffeo = record.diffeo;
        if !record.converged {
            flags.push(format!(
                "probe at r = {r} stopped before meeting the gradient tolerance"
            ));
        }
        probes.push(record);
        Ok(diffeo)
    };
    // The identity-like upper end: a probe at r = R minimizes within maps
    // A(R,1) → A(R,1) and must be diffeomorphic.
    let mut hi = big_r;
    if !run(hi, &mut probes)? {
        return Err(SolverError::ExplorerAborted {
            lo: 0.0,
            hi,
            reason: "no diffeomorphic upper bracket: even r = R failed the Jacobian test"
                .to_string(),
        });
    }
    let mut lo = big_r / 6.0;
    let mut attempts = 0;
    while run(lo, &mut probes)? {
        hi = lo;
        lo *= 0.5;
        attempts += 1;
        if attempts >= 8 {
            return Err(SolverError::ExplorerAborted {
                lo: 0.0,
                hi,
                reason: format!("minimizers stayed diffeomorphic down to r = {lo}"),
            });
        }
    }
    let mut guard = 0;
    while hi - lo > bisect_tol && guard < 60 {
        let mid = 0.5 * (lo + hi);
        if run(mid, &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
        guard += 1;
    }
    Ok(ExploreResult {
        r_estimate: 0.5 * (lo + hi),
        bracket: (lo, hi),
        probes,
        flags,
    })
}

/// Deterministically perturbs a map with a smooth low-frequency field:
/// interior nodes are displaced by up to `amplitude`, tapered to zero at the
/// boundary rings, while boundary nodes rotate along their circles by an
/// angular wave of size `amplitude` radians. Smoothness keeps the Jacobian
/// of mild perturbations positive, unlike node-independent noise whose
/// derivatives blow up with mesh refinement.
pub fn perturb_map(
    map: &DiscreteMap,
    amplitude: f64,
    seed: u64,
) -> Result<DiscreteMap, EnergyError> {
    let mesh = map.mesh();
    let (nr, nt) = (mesh.n_radial(), mesh.n_angular());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wave = || {
        (
            rng.gen_range(1..=3) as f64,
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
    };
    let (k_re, ph_re) = wave();
    let (k_im, ph_im) = wave();
    let (k_in, ph_in) = wave();
    let (k_out, ph_out) = wave();
    let sigma0 = mesh.radius(0).ln();
    let span = mesh.radius(nr - 1).ln() - sigma0;
    let mut values = map.values().clone();
    for i in 0..nr {
        let u = (mesh.radius(i).ln() - sigma0) / span;
        let taper = (std::f64::consts::PI * u).sin();
        for j in 0..nt {
            let t = mesh.angle(j);
            if i == 0 {
                let delta = amplitude * (k_in * t + ph_in).cos();
                values[[i, j]] *= Complex64::from_polar(1.0, delta);
            } else if i == nr - 1 {
                let delta = amplitude * (k_out * t + ph_out).cos();
                values[[i, j]] *= Complex64::from_polar(1.0, delta);
            } else {
                values[[i, j]] += Complex64::new(
                    amplitude * taper * (k_re * t + ph_re).cos(),
                    amplitude * taper * (k_im * t + ph_im).cos(),
                );
            }
        }
    }
    DiscreteMap::from_values(mesh, values)
}
