//! Conformal metric densities ρ on plane domains.
//!
//! A metric is a positive weight `ρ(w)` on the target domain; maps are graded
//! by the weighted energy `∫ (|∂f|² + |∂̄f|²) ρ²(f)`. This module evaluates
//! ρ, its logarithmic gradient and Laplacian, the Gauss curvature, metric
//! areas `∫ ρ² dλ`, and admissibility (bounded density, bounded `|∇log ρ|`,
//! finite curvature and area).
//!
//! Supported kinds: the flat density `ρ ≡ 1`; the spherical density
//! `ρ = (1+|w|²)⁻²`; the hyperbolic density `ρ = (1−|w|²)⁻²` restricted to
//! the open unit disk; radial tables `ρ(w) = 1/ϱ(|w|)` built from sampled
//! profiles `ϱ` by monotone cubic interpolation in log–log coordinates; and
//! user-supplied analytic closures.
//!
//! Curvature convention: `gauss_curvature` divides by ρ, matching the
//! formula this crate standardizes on; `gauss_curvature_standard` divides by
//! ρ² for comparison with the textbook convention. Reports expose both.

use num_complex::Complex;
#[cfg(test)]
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::Annulus;
use crate::interp::Pchip;
use crate::Complex64;

/// Errors from metric evaluation and integration.
#[derive(Debug, Error)]
pub enum MetricError {
    #[error("metric '{kind}' is undefined at w = {w} (domain violation)")]
    DomainViolation { kind: String, w: Complex64 },
    #[error("invalid radial table: {0}")]
    InvalidTable(String),
    #[error("unknown metric kind '{0}' (expected euclidean, spherical, hyperbolic-restricted, or radial-table)")]
    UnknownKind(String),
    #[error("metric kind '{0}' requires a profile table")]
    MissingTable(String),
    #[error("metric kind '{0}' does not accept a profile table")]
    UnexpectedTable(String),
    #[error("area integral of metric '{kind}' overflows (non-integrable density over the domain)")]
    AreaOverflow { kind: String },
    #[error("quadrature resolution must be at least 16 per dimension, got {0}")]
    ResolutionTooSmall(usize),
}

/// Radial density defined by interpolating a sampled profile `ϱ` with
/// `ρ(w) = 1/ϱ(|w|)`.
///
/// The interpolant runs through `ψ(ξ) = log ϱ(e^ξ)` in log–log coordinates,
/// so positivity of ρ is automatic and the knot values are reproduced
/// exactly.
#[derive(Debug, Clone)]
pub struct RadialTable {
    /// ψ(ξ) = log ϱ(e^ξ), ξ = log s.
    log_profile: Pchip,
    s_min: f64,
    s_max: f64,
}

impl RadialTable {
    /// Build from rows `(s, ϱ(s))` with strictly increasing positive `s` and
    /// positive profile values.
    pub fn from_profile_samples(rows: &[[f64; 2]]) -> Result<Self, MetricError> {
        if rows.len() < 2 {
            return Err(MetricError::InvalidTable(format!(
                "need at least 2 rows, got {}",
                rows.len()
            )));
        }
        let mut xi = Vec::with_capacity(rows.len());
        let mut psi = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let [s, varrho] = *row;
            if !(s.is_finite() && s > 0.0) {
                return Err(MetricError::InvalidTable(format!(
                    "row {k}: radius {s} must be finite and positive"
                )));
            }
            if !(varrho.is_finite() && varrho > 0.0) {
                return Err(MetricError::InvalidTable(format!(
                    "row {k}: profile value {varrho} must be finite and positive"
                )));
            }
            xi.push(s.ln());
            psi.push(varrho.ln());
        }
        if xi.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MetricError::InvalidTable(
                "radii must be strictly increasing".to_string(),
            ));
        }
        let log_profile = Pchip::new(xi, psi)
            .map_err(|e| MetricError::InvalidTable(e.to_string()))?;
        Ok(RadialTable {
            log_profile,
            s_min: rows[0][0],
            s_max: rows[rows.len() - 1][0],
        })
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    fn log_rho_at(&self, s: f64) -> f64 {
        -self.log_profile.eval(s.ln())
    }

    /// dψ/dξ at ξ = log s, with the sign flipped to refer to log ρ = −ψ.
    fn dlog_rho_dxi(&self, s: f64) -> f64 {
        -self.log_profile.deriv(s.ln())
    }

    fn d2log_rho_dxi2(&self, s: f64) -> f64 {
        -self.log_profile.second_deriv(s.ln())
    }
}

/// Metric defined by user closures with exact derivative evaluators.
#[derive(Clone)]
pub struct AnalyticMetric {
    name: String,
    rho: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>,
    grad_log_rho: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
    laplace_log_rho: Arc<dyn Fn(Complex64) -> f64 + Send + Sync>,
    in_domain: Arc<dyn Fn(Complex64) -> bool + Send + Sync>,
}

impl AnalyticMetric {
    pub fn new(
        name: impl Into<String>,
        rho: impl Fn(Complex64) -> f64 + Send + Sync + 'static,
        grad_log_rho: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        laplace_log_rho: impl Fn(Complex64) -> f64 + Send + Sync + 'static,
        in_domain: impl Fn(Complex64) -> bool + Send + Sync + 'static,
    ) -> Self {
        AnalyticMetric {
            name: name.into(),
            rho: Arc::new(rho),
            grad_log_rho: Arc::new(grad_log_rho),
            laplace_log_rho: Arc::new(laplace_log_rho),
            in_domain: Arc::new(in_domain),
        }
    }
}

impl fmt::Debug for AnalyticMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticMetric")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// A conformal metric density on a plane domain.
#[derive(Debug, Clone)]
pub enum Metric {
    /// `ρ ≡ 1` on all of ℂ.
    Euclidean,
    /// `ρ(w) = (1+|w|²)⁻²` on all of ℂ; constant curvature `8` under the
    /// division-by-ρ convention.
    Spherical,
    /// `ρ(w) = (1−|w|²)⁻²` on the open unit disk; the density blows up at the
    /// circle, so annuli touching `|w| = 1` are not admissible.
    HyperbolicRestricted,
    /// Radial density interpolated from a profile table.
    RadialTable(RadialTable),
    /// User-supplied closures.
    Analytic(AnalyticMetric),
}

impl Metric {
    /// Build a metric from its config name, with an optional profile table
    /// for the `radial-table` kind. Accepts the aliases `paper-spherical`
    /// and `hyperbolic`.
    pub fn from_kind(kind: &str, table: Option<&[[f64; 2]]>) -> Result<Metric, MetricError> {
        let m = match kind {
            "euclidean" => Metric::Euclidean,
            "spherical" | "paper-spherical" => Metric::Spherical,
            "hyperbolic-restricted" | "hyperbolic" => Metric::HyperbolicRestricted,
            "radial-table" => {
                let rows = table.ok_or_else(|| MetricError::MissingTable(kind.to_string()))?;
                return Ok(Metric::RadialTable(RadialTable::from_profile_samples(rows)?));
            }
            other => return Err(MetricError::UnknownKind(other.to_string())),
        };
        if table.is_some_and(|t| !t.is_empty()) {
            return Err(MetricError::UnexpectedTable(kind.to_string()));
        }
        Ok(m)
    }

    pub fn kind_name(&self) -> &str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Spherical => "spherical",
            Metric::HyperbolicRestricted => "hyperbolic-restricted",
            Metric::RadialTable(_) => "radial-table",
            Metric::Analytic(a) => &a.name,
        }
    }

    /// True if `w` lies in the metric's domain of definition.
    pub fn in_domain(&self, w: Complex64) -> bool {
        match self {
            Metric::Euclidean | Metric::Spherical => true,
            Metric::HyperbolicRestricted => w.norm_sqr() < 1.0,
            Metric::RadialTable(t) => {
                let s = w.norm();
                s >= t.s_min * (1.0 - 1e-12) && s <= t.s_max * (1.0 + 1e-12)
            }
            Metric::Analytic(a) => (a.in_domain)(w),
        }
    }

    /// ρ(w) without a domain check; may return non-finite values outside the
    /// domain (used by samplers that fold such values into overflow flags).
    pub(crate) fn rho_raw(&self, w: Complex64) -> f64 {
        match self {
            Metric::Euclidean => 1.0,
            Metric::Spherical => {
                let q = 1.0 + w.norm_sqr();
                1.0 / (q * q)
            }
            Metric::HyperbolicRestricted => {
                let q = 1.0 - w.norm_sqr();
                1.0 / (q * q)
            }
            Metric::RadialTable(t) => t.log_rho_at(w.norm()).exp(),
            Metric::Analytic(a) => (a.rho)(w),
        }
    }

    /// ∇log ρ as the complex number `∂ₓ log ρ + i ∂ᵧ log ρ`, without a
    /// domain check.
    pub(crate) fn grad_log_rho_raw(&self, w: Complex64) -> Complex64 {
        match self {
            Metric::Euclidean => Complex::new(0.0, 0.0),
            Metric::Spherical => -4.0 * w / (1.0 + w.norm_sqr()),
            Metric::HyperbolicRestricted => 4.0 * w / (1.0 - w.norm_sqr()),
            Metric::RadialTable(t) => {
                let s2 = w.norm_sqr();
                // For u(ξ(s)) with ξ = log s: ∇u = u'(ξ) · w/|w|².
                t.dlog_rho_dxi(s2.sqrt()) * w / s2
            }
            Metric::Analytic(a) => (a.grad_log_rho)(w),
        }
    }

    /// Δ log ρ without a domain check.
    pub(crate) fn laplace_log_rho_raw(&self, w: Complex64) -> f64 {
        match self {
            Metric::Euclidean => 0.0,
            Metric::Spherical => {
                let q = 1.0 + w.norm_sqr();
                -8.0 / (q * q)
            }
            Metric::HyperbolicRestricted => {
                let q = 1.0 - w.norm_sqr();
                8.0 / (q * q)
            }
            Metric::RadialTable(t) => {
                // For u(ξ(s)): Δu = u''(ξ)/s².
                let s2 = w.norm_sqr();
                t.d2log_rho_dxi2(s2.sqrt()) / s2
            }
            Metric::Analytic(a) => (a.laplace_log_rho)(w),
        }
    }

    fn check_domain(&self, w: Complex64) -> Result<(), MetricError> {
        if self.in_domain(w) {
            Ok(())
        } else {
            Err(MetricError::DomainViolation {
                kind: self.kind_name().to_string(),
                w,
            })
        }
    }
}

/// Evaluate ρ(w); errors outside the metric's domain.
pub fn rho(m: &Metric, w: Complex64) -> Result<f64, MetricError> {
    m.check_domain(w)?;
    Ok(m.rho_raw(w))
}

/// ∇log ρ(w) as `∂ₓ log ρ + i ∂ᵧ log ρ`.
pub fn grad_log_rho(m: &Metric, w: Complex64) -> Result<Complex64, MetricError> {
    m.check_domain(w)?;
    Ok(m.grad_log_rho_raw(w))
}

/// Δ log ρ(w).
pub fn laplace_log_rho(m: &Metric, w: Complex64) -> Result<f64, MetricError> {
    m.check_domain(w)?;
    Ok(m.laplace_log_rho_raw(w))
}

/// Gauss curvature in the convention canonical here: `K = −Δ log ρ / ρ`.
pub fn gauss_curvature(m: &Metric, w: Complex64) -> Result<f64, MetricError> {
    m.check_domain(w)?;
    Ok(-m.laplace_log_rho_raw(w) / m.rho_raw(w))
}

/// Gauss curvature in the textbook convention `K = −Δ log ρ / ρ²`.
pub fn gauss_curvature_standard(m: &Metric, w: Complex64) -> Result<f64, MetricError> {
    m.check_domain(w)?;
    let r = m.rho_raw(w);
    Ok(-m.laplace_log_rho_raw(w) / (r * r))
}

/// Integration domain for metric area.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    Annulus(Annulus),
    Disk { radius: f64 },
}

impl Domain {
    fn radial_range(&self) -> (f64, f64) {
        match self {
            Domain::Annulus(a) => (a.inner(), a.outer()),
            Domain::Disk { radius } => (0.0, *radius),
        }
    }
}

/// Metric area `∫ ρ² dλ` over the domain by composite Simpson quadrature in
/// radius crossed with the rectangle rule in angle.
///
/// Non-integrable densities surface as an overflow error rather than a silent
/// infinity.
pub fn area(m: &Metric, domain: &Domain, resolution: usize) -> Result<f64, MetricError> {
    if resolution < 16 {
        return Err(MetricError::ResolutionTooSmall(resolution));
    }
    let (s_lo, s_hi) = domain.radial_range();
    // Simpson needs an even subinterval count.
    let n_r = resolution + resolution % 2;
    let n_t = resolution;
    let h = (s_hi - s_lo) / n_r as f64;
    let d_theta = std::f64::consts::TAU / n_t as f64;

    let mut total = 0.0;
    for i in 0..=n_r {
        let s = s_lo + i as f64 * h;
        let simpson_w = if i == 0 || i == n_r {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let mut ring = 0.0;
        for j in 0..n_t {
            let w = Complex::from_polar(s, j as f64 * d_theta);
            let r = m.rho_raw(w);
            let val = r * r;
            if !val.is_finite() {
                return Err(MetricError::AreaOverflow {
                    kind: m.kind_name().to_string(),
                });
            }
            ring += val;
        }
        total += simpson_w * ring * s;
    }
    let value = total * (h / 3.0) * d_theta;
    if !value.is_finite() {
        return Err(MetricError::AreaOverflow {
            kind: m.kind_name().to_string(),
        });
    }
    Ok(value)
}

/// Admissibility summary of a metric over a domain.
///
/// `grad_log_sup` is a dense-sampling estimate of `sup |∇log ρ|`;
/// `grad_log_sup_margin` adds a 10% safety factor and is still an estimate,
/// not a proven supremum. Both curvature conventions are reported. Sampled
/// quantities are `None` when they are unbounded over the domain, which in
/// JSON reads as `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub kind: String,
    pub curvature_bound: Option<f64>,
    pub curvature_bound_standard: Option<f64>,
    pub area: Option<f64>,
    pub grad_log_sup: Option<f64>,
    pub grad_log_sup_margin: Option<f64>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub admissible: bool,
}

/// Sample ρ, |∇log ρ|, and |K| over a dense grid (resolution per dimension,
/// boundary included) and decide admissibility: every sampled point must be
/// in the metric's domain with finite density bounded away from zero, finite
/// gradient bound, finite curvature bound, and finite area.
pub fn admissibility_report(
    m: &Metric,
    domain: &Domain,
    resolution: usize,
) -> AdmissibilityReport {
    let n = resolution.max(2);
    let (s_lo, s_hi) = domain.radial_range();
    let d_theta = std::f64::consts::TAU / n as f64;

    let mut rho_min = f64::INFINITY;
    let mut rho_max: f64 = 0.0;
    let mut grad_sup: f64 = 0.0;
    let mut curv_sup: f64 = 0.0;
    let mut curv_std_sup: f64 = 0.0;
    let mut domain_ok = true;

    for i in 0..n {
        let s = s_lo + (s_hi - s_lo) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let w = Complex::from_polar(s, j as f64 * d_theta);
            if !m.in_domain(w) {
                domain_ok = false;
            }
            let r = m.rho_raw(w);
            rho_min = rho_min.min(r);
            rho_max = rho_max.max(r);
            grad_sup = grad_sup.max(m.grad_log_rho_raw(w).norm());
            let lap = m.laplace_log_rho_raw(w);
            curv_sup = curv_sup.max((lap / r).abs());
            curv_std_sup = curv_std_sup.max((lap / (r * r)).abs());
        }
    }

    let area_val = match area(m, domain, resolution.max(16)) {
        Ok(v) => v,
        Err(_) => f64::INFINITY,
    };

    let admissible = domain_ok
        && rho_min.is_finite()
        && rho_min > 0.0
        && rho_max.is_finite()
        && grad_sup.is_finite()
        && curv_sup.is_finite()
        && area_val.is_finite();

    let fin = |x: f64| x.is_finite().then_some(x);
    AdmissibilityReport {
        kind: m.kind_name().to_string(),
        curvature_bound: fin(curv_sup),
        curvature_bound_standard: fin(curv_std_sup),
        area: fin(area_val),
        grad_log_sup: fin(grad_sup),
        grad_log_sup_margin: fin(grad_sup * 1.1),
        rho_min: fin(rho_min),
        rho_max: fin(rho_max),
        admissible,
    }
}

/// Infimum of ρ over a closed annulus.
///
/// Exact for the closed-form kinds (the radial densities are monotone in
/// `|w|`); for tables the interpolant is minimized over a dense sample, and
/// for analytic closures a dense-sample estimate is shrunk by 5% as a safety
/// margin.
pub fn inf_rho(m: &Metric, annulus: &Annulus) -> f64 {
    let (r, big_r) = (annulus.inner(), annulus.outer());
    match m {
        Metric::Euclidean => 1.0,
        // Decreasing in |w|: infimum on the outer circle.
        Metric::Spherical => {
            let q = 1.0 + big_r * big_r;
            1.0 / (q * q)
        }
        // Increasing in |w|: infimum on the inner circle.
        Metric::HyperbolicRestricted => {
            let q = 1.0 - r * r;
            1.0 / (q * q)
        }
        Metric::RadialTable(_) => dense_min_rho(m, r, big_r),
        Metric::Analytic(_) => 0.95 * dense_min_rho(m, r, big_r),
    }
}

fn dense_min_rho(m: &Metric, r: f64, big_r: f64) -> f64 {
    let n_r = 512;
    let n_t = 64;
    let mut best = f64::INFINITY;
    for i in 0..=n_r {
        let s = r + (big_r - r) * i as f64 / n_r as f64;
        for j in 0..n_t {
            let w = Complex::from_polar(s, std::f64::consts::TAU * j as f64 / n_t as f64);
            best = best.min(m.rho_raw(w));
        }
    }
    best
}

/// Draw a uniform random point of the open annulus `(s_lo, s_hi)`, kept away
/// from the radial boundaries by the fraction `pad` of the gap.
#[cfg(test)]
pub(crate) fn random_interior_point<R: Rng>(
    rng: &mut R,
    s_lo: f64,
    s_hi: f64,
    pad: f64,
) -> Complex64 {
    let gap = s_hi - s_lo;
    let s = rng.gen_range(s_lo + pad * gap..s_hi - pad * gap);
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex::from_polar(s, t)
}
