//! Radial machinery: the one-parameter family of radial maps between
//! annuli, the critical constant, the critical inner radius, and the affine
//! closed forms for the flat metric.
//!
//! For a radial profile `ϱ` on `[R, 1]` and a parameter `γ`, define
//!
//! ```text
//! q(s) = exp( ∫₁ˢ dy / √(y² + γ ϱ²(y)) ),      r(γ) = q(R).
//! ```
//!
//! The map `w(s e^{it}) = q⁻¹(s) e^{it}` then carries `A(r(γ), 1)` onto
//! `A(R, 1)` and is stationary for the weighted energy with `ρ = 1/ϱ`. The
//! radicand stays non-negative exactly for `γ ≥ γ_♦ = −min y²/ϱ²(y)`; at the
//! critical value the radicand vanishes at an endpoint, `r(γ_♦)` is the
//! smallest reachable inner radius, and the map degenerates on the inner
//! circle (zero radial stretch, so the inverse map has unbounded derivative
//! there).
//!
//! For the flat metric the family is complemented by closed forms: the
//! affine maps `a/z̄ + b z`, the critical map `(r² + |z|²)/(z̄ (1 + r²))`,
//! and the diffeomorphism threshold `2r/(1+r²)`. All carry exact Wirtinger
//! derivative evaluators.

use num_complex::Complex;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::{make_annulus, Annulus};
use crate::interp::Pchip;
use crate::metrics::Metric;
use crate::quad::{integrate, QuadResult};
use crate::Complex64;

/// Errors from the radial family.
#[derive(Debug, Error)]
pub enum RadialError {
    #[error("radicand y² + γ·ϱ²(y) = {value:.6e} is negative at y = {y:.8} (existence condition violated)")]
    RadicandNegative { y: f64, value: f64 },
    #[error("radicand y² + γ·ϱ²(y) vanishes at interior point y = {y:.8}; the integral is non-integrable there")]
    NonIntegrable { y: f64 },
    #[error("s = {0} must lie in (0, 1]")]
    SOutOfRange(f64),
    #[error("R = {0} must lie in (0, 1)")]
    ROutOfRange(f64),
    #[error("target inner radius {0} must lie in (0, 1)")]
    TargetOutOfRange(f64),
    #[error("Nitsche condition violated: target inner radius {r_target:.8} is below the critical radius {r_diamond:.8}; no radial map exists")]
    NitscheViolated { r_target: f64, r_diamond: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// A positive radial profile `ϱ(s)`, the reciprocal of a radial metric
/// density: `ρ(w) = 1/ϱ(|w|)`.
#[derive(Clone)]
pub struct Profile {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Profile").field("name", &self.name).finish_non_exhaustive()
    }
}

impl Profile {
    /// The flat profile `ϱ ≡ 1`.
    pub fn unit() -> Self {
        Profile {
            name: "unit".to_string(),
            f: Arc::new(|_| 1.0),
        }
    }

    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Profile {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Monotone log–log interpolation of sampled `(s, ϱ(s))` rows.
    pub fn from_table(rows: &[[f64; 2]]) -> Result<Self, RadialError> {
        let table = crate::metrics::RadialTable::from_profile_samples(rows)
            .map_err(|e| RadialError::InvalidProfile(e.to_string()))?;
        let m = Metric::RadialTable(table);
        Ok(Profile {
            name: "table".to_string(),
            f: Arc::new(move |s| 1.0 / m.rho_raw(Complex::new(s, 0.0))),
        })
    }

    /// Extract the radial profile of a rotationally symmetric metric
    /// (`ϱ(s) = 1/ρ(s)`); `None` for analytic metrics, which need not be
    /// radial.
    pub fn from_metric(m: &Metric) -> Option<Self> {
        match m {
            Metric::Euclidean => Some(Profile::unit()),
            Metric::Spherical => Some(Profile::from_fn("spherical", |s| {
                let q = 1.0 + s * s;
                q * q
            })),
            Metric::HyperbolicRestricted => Some(Profile::from_fn("hyperbolic-restricted", |s| {
                let q = 1.0 - s * s;
                q * q
            })),
            Metric::RadialTable(_) => {
                let m = m.clone();
                Some(Profile {
                    name: "radial-table".to_string(),
                    f: Arc::new(move |s| 1.0 / m.rho_raw(Complex::new(s, 0.0))),
                })
            }
            Metric::Analytic(_) => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }
}

/// Radicand `W(y) = y² + γ ϱ²(y)`.
fn radicand(profile: &Profile, gamma: f64, y: f64) -> f64 {
    let v = profile.eval(y);
    y * y + gamma * v * v
}

/// Scan `[lo, hi]` for sign violations or interior zeros of the radicand.
fn check_radicand(profile: &Profile, gamma: f64, lo: f64, hi: f64) -> Result<(), RadialError> {
    const N: usize = 4096;
    let mut min_val = f64::INFINITY;
    let mut min_y = lo;
    let mut scale: f64 = 0.0;
    for k in 0..=N {
        let y = lo + (hi - lo) * k as f64 / N as f64;
        let w = radicand(profile, gamma, y);
        scale = scale.max(w.abs());
        if w < min_val {
            min_val = w;
            min_y = y;
        }
    }
    let tol = 1e-12 * scale.max(1e-300);
    if min_val < -tol {
        return Err(RadialError::RadicandNegative {
            y: min_y,
            value: min_val,
        });
    }
    if min_val.abs() <= tol {
        let step = (hi - lo) / N as f64;
        let interior = min_y - lo > 1.5 * step && hi - min_y > 1.5 * step;
        if interior {
            return Err(RadialError::NonIntegrable { y: min_y });
        }
    }
    Ok(())
}

/// Is the radicand (numerically) vanishing at `y`, relative to its scale on
/// the interval?
fn is_singular_end(profile: &Profile, gamma: f64, y: f64, scale: f64) -> bool {
    radicand(profile, gamma, y) < 1e-5 * scale.max(1e-300)
}

fn radicand_scale(profile: &Profile, gamma: f64, lo: f64, hi: f64) -> f64 {
    let mut scale: f64 = 0.0;
    for k in 0..=64 {
        let y = lo + (hi - lo) * k as f64 / 64.0;
        scale = scale.max(radicand(profile, gamma, y).abs());
    }
    scale
}

/// ∫ₐᵇ dy/√W with an (integrable) zero of `W` allowed at `a` or `b`.
///
/// A vanishing endpoint is removed by the substitution `y = end ∓ u²`, under
/// which the integrand `2u/√W(end ∓ u²)` is smooth; the radicand is
/// re-expressed as `max(W(end), 0)` plus an increment evaluated in
/// difference form so that the cancellation at the zero costs no accuracy.
fn inv_sqrt_integral(
    profile: &Profile,
    gamma: f64,
    a: f64,
    b: f64,
    sing_lo: bool,
    sing_hi: bool,
) -> Result<f64, RadialError> {
    if a == b {
        return Ok(0.0);
    }
    // Tolerances sit two decades above the rounding floor of the two-half
    // estimator while keeping r(γ) accurate to ~1e−10.
    const REL: f64 = 1e-10;
    const ABS: f64 = 1e-12;
    let plain = |lo: f64, hi: f64| -> Result<QuadResult, RadialError> {
        integrate(
            &|y: f64| 1.0 / radicand(profile, gamma, y).max(0.0).sqrt(),
            lo,
            hi,
            REL,
            ABS,
        )
        .map_err(|e| RadialError::Quadrature(e.to_string()))
    };
    // Increment W(end ∓ u²) − W(end), written in product form so the
    // near-cancellation at the vanishing endpoint costs no accuracy.
    let increment = |end: f64, sign: f64, u: f64| -> f64 {
        let dy = sign * u * u;
        let y = end + dy;
        let v_end = profile.eval(end);
        let v = profile.eval(y);
        dy * (y + end) + gamma * (v + v_end) * (v - v_end)
    };
    let substituted = |end: f64, sign: f64, u_max: f64| -> Result<QuadResult, RadialError> {
        let w_end = radicand(profile, gamma, end).max(0.0);
        integrate(
            &|u: f64| {
                let w = w_end + increment(end, sign, u);
                if w <= 0.0 {
                    0.0
                } else {
                    2.0 * u / w.sqrt()
                }
            },
            0.0,
            u_max,
            REL,
            ABS,
        )
        .map_err(|e| RadialError::Quadrature(e.to_string()))
    };

    // A singular end takes the substituted form over the whole stretch up to
    // the midpoint (both ends) or up to the far end (one end): the direct
    // radicand evaluation near a vanishing endpoint loses all its digits to
    // cancellation, so no plain piece may touch it.
    let mut total = 0.0;
    let mut err = 0.0;
    let mut add = |r: QuadResult| {
        total += r.value;
        err += r.error_estimate;
    };
    if sing_lo && sing_hi {
        let mid = 0.5 * (a + b);
        add(substituted(a, 1.0, (mid - a).sqrt())?);
        add(substituted(b, -1.0, (b - mid).sqrt())?);
    } else if sing_lo {
        add(substituted(a, 1.0, (b - a).sqrt())?);
    } else if sing_hi {
        add(substituted(b, -1.0, (b - a).sqrt())?);
    } else {
        add(plain(a, b)?);
    }
    // Each piece satisfies its own tolerance; guard the assembled sum at a
    // much looser threshold so a silent accuracy loss cannot pass unnoticed.
    if err > 1e-6 * (1.0 + total.abs()) {
        return Err(RadialError::Quadrature(format!(
            "assembled quadrature error estimate {err:.3e} too large"
        )));
    }
    Ok(total)
}

/// `q(s) = exp(∫₁ˢ dy/√(y² + γ ϱ²(y)))` by adaptive quadrature.
pub fn q_gamma(profile: &Profile, gamma: f64, s: f64) -> Result<f64, RadialError> {
    if !(s > 0.0 && s <= 1.0) || !s.is_finite() {
        return Err(RadialError::SOutOfRange(s));
    }
    if s == 1.0 {
        return Ok(1.0);
    }
    check_radicand(profile, gamma, s, 1.0)?;
    let scale = radicand_scale(profile, gamma, s, 1.0);
    let sing_lo = is_singular_end(profile, gamma, s, scale);
    let sing_hi = is_singular_end(profile, gamma, 1.0, scale);
    let integral = inv_sqrt_integral(profile, gamma, s, 1.0, sing_lo, sing_hi)?;
    Ok((-integral).exp())
}

/// Inner radius of the source annulus: `r(γ) = q(R)`.
pub fn r_of_gamma(profile: &Profile, gamma: f64, big_r: f64) -> Result<f64, RadialError> {
    if !(big_r > 0.0 && big_r < 1.0) {
        return Err(RadialError::ROutOfRange(big_r));
    }
    q_gamma(profile, gamma, big_r)
}

/// Critical constant together with the monotonicity diagnosis of `t·ρ(t)`.
#[derive(Debug, Clone)]
pub struct GammaDiamond {
    pub gamma: f64,
    /// Whether `t·ρ(t) = t/ϱ(t)` is monotone on `[R, 1]` (sampled densely).
    pub monotone: bool,
    pub warnings: Vec<String>,
}

/// `γ_♦ = −min_{R ≤ y ≤ 1} y²ρ²(y)` with `ρ = 1/ϱ`, reporting whether the
/// endpoint formula applied.
///
/// When `t·ρ(t)` is monotone the minimum sits at an endpoint and the exact
/// value `−min{R²ρ²(R), ρ²(1)}` is returned; otherwise a dense-sample
/// minimum is used and a warning is recorded.
pub fn gamma_diamond_detailed(profile: &Profile, big_r: f64) -> GammaDiamond {
    let m = |t: f64| t / profile.eval(t);
    const N: usize = 4096;
    let mut monotone_up = true;
    let mut monotone_down = true;
    let mut prev = m(big_r);
    let mut dense_min = prev * prev;
    for k in 1..=N {
        let t = big_r + (1.0 - big_r) * k as f64 / N as f64;
        let v = m(t);
        if v < prev - 1e-14 {
            monotone_up = false;
        }
        if v > prev + 1e-14 {
            monotone_down = false;
        }
        dense_min = dense_min.min(v * v);
        prev = v;
    }
    let monotone = monotone_up || monotone_down;
    if monotone {
        let end_min = (m(big_r) * m(big_r)).min(m(1.0) * m(1.0));
        GammaDiamond {
            gamma: -end_min,
            monotone: true,
            warnings: Vec::new(),
        }
    } else {
        GammaDiamond {
            gamma: -dense_min,
            monotone: false,
            warnings: vec![
                "profile has non-monotone t\u{b7}\u{3c1}(t); critical constant taken over dense samples instead of endpoints".to_string(),
            ],
        }
    }
}

/// `γ_♦` as a bare number; see [`gamma_diamond_detailed`].
pub fn gamma_diamond(profile: &Profile, big_r: f64) -> f64 {
    gamma_diamond_detailed(profile, big_r).gamma
}

/// Critical inner radius `r_♦ = r(γ_♦)`, handling the integrable endpoint
/// zero of the radicand.
pub fn nitsche_radius(profile: &Profile, big_r: f64) -> Result<f64, RadialError> {
    let gamma = gamma_diamond(profile, big_r);
    r_of_gamma(profile, gamma, big_r)
}

/// Invert `γ ↦ r(γ)` for a prescribed source inner radius, by bisection on
/// `[γ_♦, γ_up]`; `r(γ)` is strictly increasing there.
pub fn gamma_for_target(
    profile: &Profile,
    big_r: f64,
    r_target: f64,
) -> Result<f64, RadialError> {
    if !(big_r > 0.0 && big_r < 1.0) {
        return Err(RadialError::ROutOfRange(big_r));
    }
    if !(r_target > 0.0 && r_target < 1.0) {
        return Err(RadialError::TargetOutOfRange(r_target));
    }
    let gamma_lo = gamma_diamond(profile, big_r);
    let r_lo = r_of_gamma(profile, gamma_lo, big_r)?;
    if r_target < r_lo - 1e-8 {
        return Err(RadialError::NitscheViolated {
            r_target,
            r_diamond: r_lo,
        });
    }
    if r_target <= r_lo {
        // Within quadrature accuracy of the critical radius.
        return Ok(gamma_lo);
    }
    // Establish an upper bracket; r(0) = R always, and r(γ) → 1 as γ → ∞.
    let mut lo = gamma_lo;
    let mut hi = 0.0;
    if r_target > big_r {
        hi = 1.0;
        let mut r_hi = r_of_gamma(profile, hi, big_r)?;
        let mut doubles = 0;
        while r_hi < r_target {
            hi *= 2.0;
            r_hi = r_of_gamma(profile, hi, big_r)?;
            doubles += 1;
            if doubles > 60 {
                return Err(RadialError::RootFinding(format!(
                    "no γ ≤ {hi:.3e} reaches inner radius {r_target}"
                )));
            }
        }
    }
    let mut best = (lo, (r_lo - r_target).abs());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let r_mid = r_of_gamma(profile, mid, big_r)?;
        let gap = (r_mid - r_target).abs();
        if gap < best.1 {
            best = (mid, gap);
        }
        if gap < 1e-12 {
            return Ok(mid);
        }
        if r_mid < r_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 < 1e-10 {
        Ok(best.0)
    } else {
        Err(RadialError::RootFinding(format!(
            "bisection stalled at |r(γ) − target| = {:.3e}",
            best.1
        )))
    }
}

/// The radial map family member for one `(profile, γ, R)` triple.
///
/// Holds the sampled table of `q` on `[R, 1]`, its monotone interpolated
/// inverse `p = q⁻¹` on `[r(γ), 1]`, and evaluators for the map
/// `w(s e^{it}) = p(s) e^{it}` and its derivatives.
#[derive(Debug, Clone)]
pub struct NitscheFamily {
    profile: Profile,
    gamma: f64,
    target_inner: f64,
    r_gamma: f64,
    q_s: Vec<f64>,
    q_vals: Vec<f64>,
    p_interp: Pchip,
    warnings: Vec<String>,
}

impl NitscheFamily {
    const TABLE_SIZE: usize = 2048;

    fn build(profile: Profile, gamma: f64, big_r: f64) -> Result<Self, RadialError> {
        if !(big_r > 0.0 && big_r < 1.0) {
            return Err(RadialError::ROutOfRange(big_r));
        }
        check_radicand(&profile, gamma, big_r, 1.0)?;
        let scale = radicand_scale(&profile, gamma, big_r, 1.0);
        let sing_lo = is_singular_end(&profile, gamma, big_r, scale);
        let sing_hi = is_singular_end(&profile, gamma, 1.0, scale);

        // Sample grading: quadratic clustering toward a vanishing endpoint
        // captures the square-root behaviour of q there.
        let n = Self::TABLE_SIZE;
        let s_at = |k: usize| -> f64 {
            let u = k as f64 / n as f64;
            let g = if sing_lo {
                u * u
            } else if sing_hi {
                1.0 - (1.0 - u) * (1.0 - u)
            } else {
                u
            };
            big_r + (1.0 - big_r) * g
        };

        // Cumulative integral from 1 downward: I_k = ∫_{s_k}^1 dy/√W.
        let mut integrals = vec![0.0; n + 1];
        for k in (0..n).rev() {
            let a = s_at(k);
            let b = s_at(k + 1);
            let piece = inv_sqrt_integral(
                &profile,
                gamma,
                a,
                b,
                sing_lo && k == 0,
                sing_hi && k == n - 1,
            )
            .map_err(|e| {
                RadialError::Quadrature(format!(
                    "q-table segment [{a:.9}, {b:.9}] (γ = {gamma}): {e}"
                ))
            })?;
            integrals[k] = integrals[k + 1] + piece;
        }

        let mut q_s = Vec::with_capacity(n + 1);
        let mut q_vals = Vec::with_capacity(n + 1);
        for k in 0..=n {
            q_s.push(s_at(k));
            q_vals.push((-integrals[k]).exp());
        }
        // Endpoints are exact by construction: q(1) = e⁰ = 1.
        let r_gamma = q_vals[0];

        // Inverse table (q, s); drop numerically collided abscissae.
        let mut inv_x = Vec::with_capacity(n + 1);
        let mut inv_y = Vec::with_capacity(n + 1);
        for k in 0..=n {
            if inv_x.last().is_some_and(|&last: &f64| q_vals[k] <= last) {
                continue;
            }
            inv_x.push(q_vals[k]);
            inv_y.push(q_s[k]);
        }
        let p_interp = Pchip::new(inv_x, inv_y)
            .map_err(|e| RadialError::InvalidProfile(format!("inverse table: {e}")))?;

        let mut warnings = Vec::new();
        let gd = gamma_diamond_detailed(&profile, big_r);
        warnings.extend(gd.warnings.iter().cloned());
        if (gamma - gd.gamma).abs() < 1e-8 {
            warnings.push(
                "critical map: the radicand vanishes on the inner boundary and the inverse derivative is unbounded there".to_string(),
            );
        }

        Ok(NitscheFamily {
            profile,
            gamma,
            target_inner: big_r,
            r_gamma,
            q_s,
            q_vals,
            p_interp,
            warnings,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Inner radius `R` of the target annulus.
    pub fn target_inner(&self) -> f64 {
        self.target_inner
    }

    /// Inner radius `r(γ) = q(R)` of the source annulus.
    pub fn r_gamma(&self) -> f64 {
        self.r_gamma
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Sampled `(s, q(s))` rows, `s ∈ [R, 1]`.
    pub fn q_samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.q_s.iter().copied().zip(self.q_vals.iter().copied())
    }

    /// Radial part `p = q⁻¹ : [r(γ), 1] → [R, 1]` of the map.
    pub fn p(&self, s: f64) -> f64 {
        self.p_interp.eval(s)
    }

    /// `p'(s) = √(p² + γ ϱ²(p)) / s`, exact given `p(s)`.
    pub fn p_prime(&self, s: f64) -> f64 {
        let p = self.p(s);
        radicand(&self.profile, self.gamma, p).max(0.0).sqrt() / s
    }

    /// FNV-1a hash of the q-table bytes, as a 16-digit hex string.
    pub fn q_table_checksum(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for k in 0..self.q_s.len() {
            eat(self.q_s[k]);
            eat(self.q_vals[k]);
        }
        format!("{h:016x}")
    }
}

/// A map with exact closed-form evaluators.
#[derive(Debug, Clone)]
pub enum AnalyticMap {
    /// `f(z) = z`.
    Identity { annulus: Annulus },
    /// `f(z) = a/z̄ + b z` on `A(source_inner, 1)`.
    EuclideanAffine {
        a: f64,
        b: f64,
        source_inner: f64,
    },
    /// `w(z) = (r² + |z|²) / (z̄ (1 + r²))` on `A(r, 1)`.
    EuclideanCritical { r: f64 },
    /// `w(s e^{it}) = p(s) e^{it}` from a [`NitscheFamily`].
    NitscheRadial(NitscheFamily),
}

impl AnalyticMap {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        match self {
            AnalyticMap::Identity { .. } => z,
            AnalyticMap::EuclideanAffine { a, b, .. } => a / z.conj() + b * z,
            AnalyticMap::EuclideanCritical { r } => {
                (r * r + z.norm_sqr()) / (z.conj() * (1.0 + r * r))
            }
            AnalyticMap::NitscheRadial(fam) => {
                let s = z.norm();
                fam.p(s) / s * z
            }
        }
    }

    /// Exact Wirtinger derivatives `(f_z, f_z̄)`.
    pub fn wirtinger(&self, z: Complex64) -> (Complex64, Complex64) {
        match self {
            AnalyticMap::Identity { .. } => (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)),
            AnalyticMap::EuclideanAffine { a, b, .. } => {
                let zbar = z.conj();
                (Complex::new(*b, 0.0), -a / (zbar * zbar))
            }
            AnalyticMap::EuclideanCritical { r } => {
                let zbar = z.conj();
                let c = 1.0 + r * r;
                (Complex::new(1.0 / c, 0.0), -(r * r) / (zbar * zbar * c))
            }
            AnalyticMap::NitscheRadial(fam) => {
                // For f = P(s) e^{it}: f_z = (P' + P/s)/2,
                // f_z̄ = e^{2it} (P' − P/s)/2.
                let s = z.norm();
                let p = fam.p(s);
                let dp = fam.p_prime(s);
                let e2it = (z / s) * (z / s);
                (
                    Complex::new(0.5 * (dp + p / s), 0.0),
                    e2it * (0.5 * (dp - p / s)),
                )
            }
        }
    }

    /// Jacobian `|f_z|² − |f_z̄|²`.
    pub fn jacobian(&self, z: Complex64) -> f64 {
        let (fz, fzb) = self.wirtinger(z);
        fz.norm_sqr() - fzb.norm_sqr()
    }

    pub fn source(&self) -> Annulus {
        match self {
            AnalyticMap::Identity { annulus } => *annulus,
            AnalyticMap::EuclideanAffine { source_inner, .. } => {
                make_annulus(*source_inner, 1.0).expect("valid source annulus")
            }
            AnalyticMap::EuclideanCritical { r } => {
                make_annulus(*r, 1.0).expect("valid source annulus")
            }
            AnalyticMap::NitscheRadial(fam) => {
                make_annulus(fam.r_gamma(), 1.0).expect("valid source annulus")
            }
        }
    }

    pub fn target(&self) -> Annulus {
        match self {
            AnalyticMap::Identity { annulus } => *annulus,
            AnalyticMap::EuclideanAffine {
                a,
                b,
                source_inner,
            } => {
                let inner = a / source_inner + b * source_inner;
                make_annulus(inner, a + b).expect("valid target annulus")
            }
            AnalyticMap::EuclideanCritical { r } => {
                make_annulus(diffeo_threshold(*r), 1.0).expect("valid target annulus")
            }
            AnalyticMap::NitscheRadial(fam) => {
                make_annulus(fam.target_inner(), 1.0).expect("valid target annulus")
            }
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            AnalyticMap::NitscheRadial(fam) => fam.warnings(),
            _ => &[],
        }
    }

    /// The underlying radial family, when this map is one of its members.
    pub fn nitsche_family(&self) -> Option<&NitscheFamily> {
        match self {
            AnalyticMap::NitscheRadial(fam) => Some(fam),
            _ => None,
        }
    }
}

/// Construct the radial map `w(s e^{it}) = q⁻¹(s) e^{it} : A(r(γ),1) → A(R,1)`.
pub fn nitsche_map(profile: &Profile, gamma: f64, big_r: f64) -> Result<AnalyticMap, RadialError> {
    Ok(AnalyticMap::NitscheRadial(NitscheFamily::build(
        profile.clone(),
        gamma,
        big_r,
    )?))
}

/// Convenience: solve for γ hitting `r_target`, then build the map.
pub fn nitsche_map_for_target(
    profile: &Profile,
    big_r: f64,
    r_target: f64,
) -> Result<AnalyticMap, RadialError> {
    let gamma = gamma_for_target(profile, big_r, r_target)?;
    nitsche_map(profile, gamma, big_r)
}

/// Affine map `f(z) = a/z̄ + b z` with `a = r(R−r)/(1−r²)`,
/// `b = (1−rR)/(1−r²)`, carrying `A(r,1)` onto `A(R,1)`.
pub fn euclidean_closed_form(r: f64, big_r: f64) -> Result<AnalyticMap, RadialError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(RadialError::ROutOfRange(r));
    }
    if !(big_r > 0.0 && big_r < 1.0) {
        return Err(RadialError::TargetOutOfRange(big_r));
    }
    let denom = 1.0 - r * r;
    Ok(AnalyticMap::EuclideanAffine {
        a: r * (big_r - r) / denom,
        b: (1.0 - r * big_r) / denom,
        source_inner: r,
    })
}

/// Largest target inner radius for which the affine map stays a
/// diffeomorphism: `2r/(1+r²)`.
pub fn diffeo_threshold(r: f64) -> f64 {
    2.0 * r / (1.0 + r * r)
}

/// The degenerate minimizer `w(z) = (r² + |z|²)/(z̄(1+r²))` for the critical
/// pair `A(r,1) → A(2r/(1+r²),1)`; its Jacobian vanishes on `|z| = r`.
pub fn critical_euclidean_map(r: f64) -> Result<AnalyticMap, RadialError> {
    if !(r > 0.0 && r < 1.0) {
        return Err(RadialError::ROutOfRange(r));
    }
    Ok(AnalyticMap::EuclideanCritical { r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_wirtinger(map: &AnalyticMap, z: Complex64, h: f64) -> (Complex64, Complex64) {
        let fx = (map.eval(z + h) - map.eval(z - h)) / (2.0 * h);
        let fy = (map.eval(z + Complex::new(0.0, h)) - map.eval(z - Complex::new(0.0, h)))
            / (2.0 * h);
        let i = Complex::new(0.0, 1.0);
        ((fx - i * fy) / 2.0, (fx + i * fy) / 2.0)
    }

    #[test]
    fn q_gamma_flat_profile_identity() {
        let p = Profile::unit();
        for s in [0.2, 0.5, 0.77, 0.999] {
            let q = q_gamma(&p, 0.0, s).unwrap();
            assert!((q - s).abs() < 1e-12, "q(s)={q} vs s={s}");
        }
        assert_eq!(q_gamma(&p, -0.3, 1.0).unwrap(), 1.0);
        assert_eq!(q_gamma(&p, 2.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn q_gamma_closed_form_cross_check() {
        // For ϱ ≡ 1 and γ = −0.36 the antiderivative is arccosh(y/0.6):
        // q(0.8) = exp(arccosh(0.8/0.6) − arccosh(1/0.6)) = (4+√7)/9.
        let p = Profile::unit();
        let q = q_gamma(&p, -0.36, 0.8).unwrap();
        let closed = ((0.8f64 / 0.6).acosh() - (1.0f64 / 0.6).acosh()).exp();
        assert!((q - closed).abs() < 1e-10, "q={q} closed={closed}");
        let algebraic = (4.0 + 7.0f64.sqrt()) / 9.0;
        assert!((q - algebraic).abs() < 1e-10);
    }

    #[test]
    fn q_gamma_rejects_bad_input() {
        let p = Profile::unit();
        // γ = −0.5 makes the radicand negative below y = √0.5.
        let err = q_gamma(&p, -0.5, 0.6).unwrap_err();
        match err {
            RadialError::RadicandNegative { y, value } => {
                assert!(value < 0.0);
                assert!(y < 0.5f64.sqrt());
            }
            other => panic!("expected radicand violation, got {other}"),
        }
        assert!(matches!(
            q_gamma(&p, 0.0, 0.0),
            Err(RadialError::SOutOfRange(_))
        ));
        assert!(matches!(
            q_gamma(&p, 0.0, 1.5),
            Err(RadialError::SOutOfRange(_))
        ));
    }

    #[test]
    fn r_of_gamma_reference_values() {
        let p = Profile::unit();
        assert!((r_of_gamma(&p, 0.0, 0.6).unwrap() - 0.6).abs() < 1e-12);
        let r_crit = r_of_gamma(&p, -0.36, 0.6).unwrap();
        assert!((r_crit - 1.0 / 3.0).abs() < 1e-9, "critical r {r_crit}");
        let r_mid = r_of_gamma(&p, -0.2, 0.6).unwrap();
        assert!(r_mid > 1.0 / 3.0 && r_mid < 0.6);
    }

    #[test]
    fn gamma_diamond_reference_values() {
        let unit = Profile::unit();
        assert!((gamma_diamond(&unit, 0.6) + 0.36).abs() < 1e-15);
        assert!((gamma_diamond(&unit, 0.8) + 0.64).abs() < 1e-15);
        // ϱ(s) = s makes y·ρ(y) ≡ 1: either endpoint gives −1.
        let linear = Profile::from_fn("linear", |s| s);
        assert!((gamma_diamond(&linear, 0.5) + 1.0).abs() < 1e-12);
        let d = gamma_diamond_detailed(&unit, 0.6);
        assert!(d.monotone && d.warnings.is_empty());
    }

    #[test]
    fn gamma_diamond_non_monotone_profile_warns() {
        let wavy = Profile::from_fn("wavy", |s| 1.0 + 0.4 * (9.0 * s).sin());
        let d = gamma_diamond_detailed(&wavy, 0.3);
        assert!(!d.monotone);
        assert!(!d.warnings.is_empty());
        // Dense minimum can only improve on the endpoint minimum.
        let m = |t: f64| t / wavy.eval(t);
        let endpoint = -(m(0.3) * m(0.3)).min(m(1.0) * m(1.0));
        assert!(d.gamma >= endpoint - 1e-12);
    }

    #[test]
    fn nitsche_radius_reference_values() {
        let p = Profile::unit();
        let r = nitsche_radius(&p, 0.6).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 1e-9, "r_crit(0.6) = {r}");
        let r = nitsche_radius(&p, 0.8).unwrap();
        assert!((r - 0.5).abs() < 1e-9, "r_crit(0.8) = {r}");
        for big_r in [0.2, 0.5, 0.9] {
            let r = nitsche_radius(&p, big_r).unwrap();
            assert!(r < big_r);
        }
    }

    #[test]
    fn nitsche_radius_matches_quadratic_root() {
        // Flat closed form R/(1+√(1−R²)) solves 2r/(1+r²) = R.
        let p = Profile::unit();
        for k in 1..=9 {
            let big_r = k as f64 / 10.0;
            let computed = nitsche_radius(&p, big_r).unwrap();
            let closed = big_r / (1.0 + (1.0 - big_r * big_r).sqrt());
            assert!(
                (computed - closed).abs() < 1e-8,
                "R={big_r}: {computed} vs {closed}"
            );
            assert!((diffeo_threshold(closed) - big_r).abs() < 1e-8);
        }
    }

    #[test]
    fn gamma_for_target_reference_values() {
        let p = Profile::unit();
        let g = gamma_for_target(&p, 0.6, 0.6).unwrap();
        assert!(g.abs() < 1e-8, "conformal case γ = {g}");
        let g = gamma_for_target(&p, 0.6, 1.0 / 3.0).unwrap();
        assert!((g + 0.36).abs() < 1e-5, "critical case γ = {g}");
        assert!(matches!(
            gamma_for_target(&p, 0.6, 0.2),
            Err(RadialError::NitscheViolated { .. })
        ));
        assert!(matches!(
            gamma_for_target(&p, 0.6, 1.2),
            Err(RadialError::TargetOutOfRange(_))
        ));
        // Targets above R need γ > 0.
        let g = gamma_for_target(&p, 0.6, 0.75).unwrap();
        assert!(g > 0.0);
        assert!((r_of_gamma(&p, g, 0.6).unwrap() - 0.75).abs() < 1e-10);
    }

    #[test]
    fn r_of_gamma_is_increasing_for_random_monotone_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for trial in 0..6 {
            let a = rng.gen_range(0.2..2.0);
            let b = rng.gen_range(0.2..2.0);
            // t·ρ(t) = a + b·t (increasing) or a + b·(2−t) (decreasing).
            let increasing = trial % 2 == 0;
            let profile = if increasing {
                Profile::from_fn("inc", move |t| t / (a + b * t))
            } else {
                Profile::from_fn("dec", move |t| t / (a + b * (2.0 - t)))
            };
            let big_r = rng.gen_range(0.3..0.7);
            let g0 = gamma_diamond(&profile, big_r);
            let mut prev = -1.0;
            for j in 0..8 {
                let g = g0 * 0.999 + (j as f64 / 7.0) * (1.0 - g0 * 0.999);
                let r = r_of_gamma(&profile, g, big_r).unwrap();
                assert!(
                    r > prev,
                    "r(γ) not increasing: r({g}) = {r} after {prev} (trial {trial})"
                );
                prev = r;
            }
        }
    }

    #[test]
    fn nitsche_map_gamma_zero_is_identity() {
        let p = Profile::unit();
        let map = nitsche_map(&p, 0.0, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let z = crate::metrics::random_interior_point(&mut rng, 0.6, 1.0, 0.0);
            assert!((map.eval(z) - z).norm() < 1e-9);
            let (fz, fzb) = map.wirtinger(z);
            assert!((fz - Complex::new(1.0, 0.0)).norm() < 1e-6);
            assert!(fzb.norm() < 1e-6);
        }
    }

    #[test]
    fn nitsche_map_boundary_correspondence() {
        let p = Profile::unit();
        for gamma in [-0.3, -0.2, -0.1, 0.15] {
            let map = nitsche_map(&p, gamma, 0.6).unwrap();
            let fam = match &map {
                AnalyticMap::NitscheRadial(f) => f,
                _ => unreachable!(),
            };
            for k in 0..12 {
                let t = std::f64::consts::TAU * k as f64 / 12.0;
                let inner = map.eval(Complex::from_polar(fam.r_gamma(), t));
                assert!((inner.norm() - 0.6).abs() < 1e-9, "γ={gamma}");
                let outer = map.eval(Complex::from_polar(1.0, t));
                assert!((outer.norm() - 1.0).abs() < 1e-10);
                // Radial maps preserve the angle.
                assert!((inner.arg() - t).abs().min((inner.arg() - t).abs() - std::f64::consts::TAU) < 1e-9 || (inner.arg() - t).cos() > 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn nitsche_map_wirtinger_consistent_with_finite_differences() {
        let p = Profile::unit();
        let map = nitsche_map(&p, -0.2, 0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let src = map.source();
        for _ in 0..20 {
            let z =
                crate::metrics::random_interior_point(&mut rng, src.inner(), src.outer(), 0.05);
            let (fz, fzb) = map.wirtinger(z);
            let (fz_fd, fzb_fd) = fd_wirtinger(&map, z, 1e-5);
            assert!((fz - fz_fd).norm() < 1e-8, "f_z {fz} vs {fz_fd}");
            assert!((fzb - fzb_fd).norm() < 1e-8, "f_z̄ {fzb} vs {fzb_fd}");
        }
    }

    #[test]
    fn nitsche_map_hopf_is_gamma_over_four() {
        // ρ²(p)·f_z·conj(f_z̄)·z² = γ/4 pointwise for radial members.
        let p = Profile::unit();
        for gamma in [-0.3, -0.1] {
            let map = nitsche_map(&p, gamma, 0.6).unwrap();
            let src = map.source();
            let mut rng = ChaCha8Rng::seed_from_u64(29);
            for _ in 0..20 {
                let z = crate::metrics::random_interior_point(
                    &mut rng,
                    src.inner(),
                    src.outer(),
                    0.02,
                );
                let (fz, fzb) = map.wirtinger(z);
                let w = map.eval(z);
                let rho = 1.0 / Profile::unit().eval(w.norm());
                let hopf = rho * rho * fz * fzb.conj() * z * z;
                assert!(
                    (hopf - Complex::new(gamma / 4.0, 0.0)).norm() < 1e-6,
                    "γ={gamma}: hopf·z² = {hopf}"
                );
            }
        }
    }

    #[test]
    fn q_composed_with_inverse_is_identity() {
        let p = Profile::unit();
        let map = nitsche_map(&p, -0.2, 0.6).unwrap();
        let fam = match &map {
            AnalyticMap::NitscheRadial(f) => f,
            _ => unreachable!(),
        };
        for k in 0..=40 {
            let s = fam.r_gamma() + (1.0 - fam.r_gamma()) * k as f64 / 40.0;
            let q_of_p = q_gamma(&p, -0.2, fam.p(s)).unwrap();
            assert!((q_of_p - s).abs() < 1e-8, "q(p({s})) = {q_of_p}");
        }
    }

    #[test]
    fn critical_family_flags_and_degenerates() {
        let p = Profile::unit();
        let gamma = gamma_diamond(&p, 0.6);
        let map = nitsche_map(&p, gamma, 0.6).unwrap();
        let fam = match &map {
            AnalyticMap::NitscheRadial(f) => f,
            _ => unreachable!(),
        };
        assert!(fam
            .warnings()
            .iter()
            .any(|w| w.contains("critical")));
        assert!((fam.r_gamma() - 1.0 / 3.0).abs() < 1e-8);
        // Radial stretch of the map vanishes at the inner boundary, so the
        // derivative of the inverse map q blows up there.
        let near = fam.p_prime(fam.r_gamma() * 1.000001);
        let far = fam.p_prime(fam.r_gamma() * 1.01);
        assert!(near < far, "p' should collapse toward the inner boundary");
        assert!(near < 0.02);
        assert!(1.0 / near > 50.0);
    }

    #[test]
    fn euclidean_closed_form_reference_values() {
        let map = euclidean_closed_form(0.5, 0.6).unwrap();
        let (a, b) = match &map {
            AnalyticMap::EuclideanAffine { a, b, .. } => (*a, *b),
            _ => unreachable!(),
        };
        assert!((a - 1.0 / 15.0).abs() < 1e-15);
        assert!((b - 14.0 / 15.0).abs() < 1e-15);
        assert!((a + b - 1.0).abs() < 1e-15);
        for k in 0..8 {
            let t = std::f64::consts::TAU * k as f64 / 8.0;
            assert!((map.eval(Complex::from_polar(1.0, t)).norm() - 1.0).abs() < 1e-14);
            assert!((map.eval(Complex::from_polar(0.5, t)).norm() - 0.6).abs() < 1e-14);
        }
        // Hopf constant c = −ab.
        let c = -a * b;
        assert!((c + 0.0622222).abs() < 1e-6);
        // Equal moduli degenerate to the identity.
        let id = euclidean_closed_form(0.5, 0.5).unwrap();
        let z = Complex::new(0.3, -0.55);
        assert!((id.eval(z) - z).norm() < 1e-15);
        // Target annulus is A(R, 1).
        let t = map.target();
        assert!((t.inner() - 0.6).abs() < 1e-15 && (t.outer() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diffeo_threshold_values() {
        assert!((diffeo_threshold(0.5) - 0.8).abs() < 1e-15);
        assert!((diffeo_threshold(0.999999) - 1.0).abs() < 1e-6);
        assert!((diffeo_threshold(1.0 / 3.0) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn critical_euclidean_map_reference_values() {
        let map = critical_euclidean_map(0.5).unwrap();
        let w = map.eval(Complex::new(0.5, 0.0));
        assert!((w.norm() - 0.8).abs() < 1e-14);
        for k in 0..8 {
            let t = std::f64::consts::TAU * k as f64 / 8.0;
            let z = Complex::from_polar(0.5, t);
            let (wz, wzb) = map.wirtinger(z);
            assert!((wz.norm() - 0.8).abs() < 1e-12);
            assert!((wzb.norm() - 0.8).abs() < 1e-12);
            assert!(map.jacobian(z).abs() < 1e-12);
            let outer = map.eval(Complex::from_polar(1.0, t));
            assert!((outer.norm() - 1.0).abs() < 1e-14);
        }
        // Derivative evaluators agree with finite differences.
        let z = Complex::from_polar(0.7, 1.1);
        let (wz, wzb) = map.wirtinger(z);
        let (wz_fd, wzb_fd) = fd_wirtinger(&map, z, 1e-5);
        assert!((wz - wz_fd).norm() < 1e-8);
        assert!((wzb - wzb_fd).norm() < 1e-8);
    }

    #[test]
    fn q_table_checksum_is_stable() {
        let p = Profile::unit();
        let m1 = nitsche_map(&p, -0.2, 0.6).unwrap();
        let m2 = nitsche_map(&p, -0.2, 0.6).unwrap();
        let (f1, f2) = match (&m1, &m2) {
            (AnalyticMap::NitscheRadial(f1), AnalyticMap::NitscheRadial(f2)) => (f1, f2),
            _ => unreachable!(),
        };
        assert_eq!(f1.q_table_checksum(), f2.q_table_checksum());
        assert_eq!(f1.q_table_checksum().len(), 16);
        let m3 = nitsche_map(&p, -0.21, 0.6).unwrap();
        let f3 = match &m3 {
            AnalyticMap::NitscheRadial(f) => f,
            _ => unreachable!(),
        };
        assert_ne!(f1.q_table_checksum(), f3.q_table_checksum());
    }

    #[test]
    fn profile_from_table_and_metric() {
        let rows: Vec<[f64; 2]> = (0..=20)
            .map(|k| {
                let s = 0.3 + 0.9 * k as f64 / 20.0;
                [s, 1.0 + 0.2 * s]
            })
            .collect();
        let p = Profile::from_table(&rows).unwrap();
        assert!((p.eval(0.6) - 1.12).abs() < 1e-3);
        let unit = Profile::from_metric(&Metric::Euclidean).unwrap();
        assert_eq!(unit.eval(0.5), 1.0);
        let sph = Profile::from_metric(&Metric::Spherical).unwrap();
        assert!((sph.eval(0.5) - 1.5625).abs() < 1e-12);
    }
}
