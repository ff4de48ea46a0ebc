//! Circular annuli, their conformal modulus, and polar grids.
//!
//! The round annulus `A(r, R) = {z : r < |z| < R}` is the common domain and
//! codomain for every map in this crate. Grids are log-uniform in radius
//! (geometric spacing) and uniform in angle, which makes the radial step
//! constant in the variable `σ = log s` and keeps angular wraparound a pure
//! index shift. The chord–arc helpers quantify how far circle arcs deviate
//! from straight chords; the constant `π/2` is the worst case on a circle,
//! attained by a half turn.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

use crate::Complex64;

/// Errors arising from invalid annulus or mesh parameters.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("annulus radii must be finite numbers, got inner = {inner}, outer = {outer}")]
    NonFiniteRadii { inner: f64, outer: f64 },
    #[error("inner radius must be positive, got {inner}")]
    NonPositiveInner { inner: f64 },
    #[error("inner radius must be strictly less than outer radius, got inner = {inner} >= outer = {outer}")]
    InnerNotBelowOuter { inner: f64, outer: f64 },
    #[error("mesh needs at least 2 radial rings, got {n_radial}")]
    TooFewRadialRings { n_radial: usize },
    #[error("mesh needs at least 4 angular nodes, got {n_angular}")]
    TooFewAngularNodes { n_angular: usize },
}

/// A round annulus `A(inner, outer)` with `0 < inner < outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    inner: f64,
    outer: f64,
}

impl Annulus {
    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    /// Conformal modulus `log(outer/inner) / 2π`.
    pub fn modulus(&self) -> f64 {
        (self.outer / self.inner).ln() / std::f64::consts::TAU
    }

    /// True if `w` lies in the closed annulus (boundary circles included).
    pub fn contains_closed(&self, w: Complex64) -> bool {
        let s = w.norm();
        s >= self.inner - 1e-14 && s <= self.outer + 1e-14
    }
}

/// Validated constructor for [`Annulus`].
pub fn make_annulus(inner: f64, outer: f64) -> Result<Annulus, GeometryError> {
    if !inner.is_finite() || !outer.is_finite() {
        return Err(GeometryError::NonFiniteRadii { inner, outer });
    }
    if inner <= 0.0 {
        return Err(GeometryError::NonPositiveInner { inner });
    }
    if inner >= outer {
        return Err(GeometryError::InnerNotBelowOuter { inner, outer });
    }
    Ok(Annulus { inner, outer })
}

/// Tensor-product polar grid on an annulus: geometric radii × uniform angles.
///
/// Radial index `i` runs from the inner circle (`i = 0`) to the outer circle
/// (`i = n_radial - 1`); angular index `j` runs over `[0, 2π)` without
/// duplicating the seam, so angular neighbours are found by index arithmetic
/// modulo `n_angular`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarMesh {
    annulus: Annulus,
    n_radial: usize,
    n_angular: usize,
    radii: Vec<f64>,
    angles: Vec<f64>,
    d_sigma: f64,
    d_theta: f64,
}

impl PolarMesh {
    pub fn annulus(&self) -> &Annulus {
        &self.annulus
    }

    pub fn n_radial(&self) -> usize {
        self.n_radial
    }

    pub fn n_angular(&self) -> usize {
        self.n_angular
    }

    pub fn node_count(&self) -> usize {
        self.n_radial * self.n_angular
    }

    /// Radial step in `σ = log s`.
    pub fn d_sigma(&self) -> f64 {
        self.d_sigma
    }

    /// Angular step.
    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn angle(&self, j: usize) -> f64 {
        self.angles[j]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Node position `s_i · e^{i θ_j}`.
    pub fn node(&self, i: usize, j: usize) -> Complex64 {
        Complex::from_polar(self.radii[i], self.angles[j])
    }

    /// Radial quadrature weight (in `σ`) for ring `i`.
    ///
    /// Interior rings carry the full step `Δσ`; the two boundary rings split
    /// one step in the ratio `e^{Δσ} : 1` (inner : outer end of the summed
    /// pair), which pairs the first-derivative boundary stencils with the
    /// trapezoid-like norm so that summation by parts holds exactly for the
    /// fitted function family.
    pub fn radial_weight(&self, i: usize) -> f64 {
        let x = self.d_sigma.exp();
        if i == 0 {
            self.d_sigma * x / (1.0 + x)
        } else if i == self.n_radial - 1 {
            self.d_sigma / (1.0 + x)
        } else {
            self.d_sigma
        }
    }

    /// Full cell weight `radial_weight(i) · Δθ` used in nodal quadratures.
    pub fn cell_weight(&self, i: usize) -> f64 {
        self.radial_weight(i) * self.d_theta
    }

    /// CSV dump of node coordinates: header `i,j,s,theta`, rows in row-major
    /// order with the radial index outermost.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,s,theta\n");
        for i in 0..self.n_radial {
            for j in 0..self.n_angular {
                let _ = writeln!(out, "{},{},{},{}", i, j, self.radii[i], self.angles[j]);
            }
        }
        out
    }
}

/// Build a polar mesh with `n_radial >= 2` geometric rings and
/// `n_angular >= 4` uniform angles.
pub fn make_polar_mesh(
    annulus: Annulus,
    n_radial: usize,
    n_angular: usize,
) -> Result<PolarMesh, GeometryError> {
    if n_radial < 2 {
        return Err(GeometryError::TooFewRadialRings { n_radial });
    }
    if n_angular < 4 {
        return Err(GeometryError::TooFewAngularNodes { n_angular });
    }
    let d_sigma = (annulus.outer() / annulus.inner()).ln() / (n_radial - 1) as f64;
    let mut radii: Vec<f64> = (0..n_radial)
        .map(|i| annulus.inner() * (i as f64 * d_sigma).exp())
        .collect();
    // Pin the endpoints so boundary rings sit exactly on the circles.
    radii[0] = annulus.inner();
    radii[n_radial - 1] = annulus.outer();
    let d_theta = std::f64::consts::TAU / n_angular as f64;
    let angles: Vec<f64> = (0..n_angular).map(|j| j as f64 * d_theta).collect();
    Ok(PolarMesh {
        annulus,
        n_radial,
        n_angular,
        radii,
        angles,
        d_sigma,
        d_theta,
    })
}

/// Ratio of arc length to chord length for a circular arc of opening angle
/// `theta ∈ (0, π]`. Tends to `1` for short arcs.
pub fn chord_arc_ratio(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return 1.0;
    }
    theta / (2.0 * (0.5 * theta).sin())
}

/// Worst-case chord–arc constant of a circle: the arc-to-chord ratio is at
/// most `π/2`, attained by a half turn.
pub fn chord_arc_constant_circle() -> f64 {
    std::f64::consts::FRAC_PI_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_annulus_validates_radii() {
        assert!(make_annulus(0.5, 1.0).is_ok());
        assert!(matches!(
            make_annulus(-0.1, 1.0),
            Err(GeometryError::NonPositiveInner { .. })
        ));
        assert!(matches!(
            make_annulus(0.0, 1.0),
            Err(GeometryError::NonPositiveInner { .. })
        ));
        assert!(matches!(
            make_annulus(1.0, 0.5),
            Err(GeometryError::InnerNotBelowOuter { .. })
        ));
        assert!(matches!(
            make_annulus(0.7, 0.7),
            Err(GeometryError::InnerNotBelowOuter { .. })
        ));
        assert!(matches!(
            make_annulus(f64::NAN, 1.0),
            Err(GeometryError::NonFiniteRadii { .. })
        ));
        assert!(matches!(
            make_annulus(0.5, f64::INFINITY),
            Err(GeometryError::NonFiniteRadii { .. })
        ));
    }

    #[test]
    fn modulus_reference_values() {
        let a = make_annulus((-std::f64::consts::TAU).exp(), 1.0).unwrap();
        assert!((a.modulus() - 1.0).abs() < 1e-12);

        let a = make_annulus(0.5, 1.0).unwrap();
        assert!((a.modulus() - 0.110318).abs() < 1e-6);

        let b = make_annulus(0.6, 1.0).unwrap();
        assert!((b.modulus() - 0.0813004).abs() < 1e-6);
        assert!(a.modulus() > b.modulus());
    }

    #[test]
    fn modulus_strictly_decreasing_in_inner_radius() {
        let mut prev = f64::INFINITY;
        for k in 1..40 {
            let r = k as f64 / 40.0;
            let m = make_annulus(r, 1.0).unwrap().modulus();
            assert!(m < prev, "modulus must decrease as the inner radius grows");
            prev = m;
        }
    }

    #[test]
    fn mesh_small_cases() {
        let a = make_annulus(0.5, 1.0).unwrap();
        let m = make_polar_mesh(a, 2, 4).unwrap();
        assert_eq!(m.radii(), &[0.5, 1.0]);
        assert_eq!(m.n_angular(), 4);

        let a = make_annulus(0.25, 1.0).unwrap();
        let m = make_polar_mesh(a, 3, 4).unwrap();
        assert!((m.radius(1) - 0.5).abs() < 1e-14);
        assert_eq!(m.radius(0), 0.25);
        assert_eq!(m.radius(2), 1.0);
    }

    #[test]
    fn mesh_node_count_and_spacing() {
        let a = make_annulus(0.5, 1.0).unwrap();
        let m = make_polar_mesh(a, 64, 128).unwrap();
        assert_eq!(m.node_count(), 8192);
        // Geometric spacing: the ratio of consecutive radii is constant.
        let q = m.radius(1) / m.radius(0);
        for i in 1..m.n_radial() - 1 {
            let qi = m.radius(i + 1) / m.radius(i);
            assert!((qi - q).abs() < 1e-12);
        }
        // Angles cover [0, 2π) uniformly without the seam duplicate.
        assert_eq!(m.angle(0), 0.0);
        let last = m.angle(m.n_angular() - 1);
        assert!(last < std::f64::consts::TAU);
        assert!((last + m.d_theta() - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn mesh_rejects_degenerate_dimensions() {
        let a = make_annulus(0.5, 1.0).unwrap();
        assert!(matches!(
            make_polar_mesh(a, 1, 8),
            Err(GeometryError::TooFewRadialRings { .. })
        ));
        assert!(matches!(
            make_polar_mesh(a, 4, 3),
            Err(GeometryError::TooFewAngularNodes { .. })
        ));
    }

    #[test]
    fn radial_weights_sum_to_sigma_length() {
        let a = make_annulus(0.5, 1.0).unwrap();
        let m = make_polar_mesh(a, 17, 8).unwrap();
        let total: f64 = (0..m.n_radial()).map(|i| m.radial_weight(i)).sum();
        assert!((total - 2.0f64.ln()).abs() < 1e-13);
        // Boundary weights split one Δσ in the ratio e^{Δσ} : 1.
        let x = m.d_sigma().exp();
        assert!((m.radial_weight(0) - m.d_sigma() * x / (1.0 + x)).abs() < 1e-16);
        assert!((m.radial_weight(16) - m.d_sigma() / (1.0 + x)).abs() < 1e-16);
        assert!((m.radial_weight(0) + m.radial_weight(16) - m.d_sigma()).abs() < 1e-16);
    }

    #[test]
    fn chord_arc_values() {
        assert!((chord_arc_constant_circle() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // Half turn attains the constant; quarter turn gives (π/2)/√2.
        assert!(
            (chord_arc_ratio(std::f64::consts::PI) - std::f64::consts::FRAC_PI_2).abs() < 1e-12
        );
        let quarter = chord_arc_ratio(std::f64::consts::FRAC_PI_2);
        assert!((quarter - std::f64::consts::FRAC_PI_2 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((quarter - 1.1107).abs() < 1e-4);
        // Ratio approaches 1 for short arcs and never exceeds the constant.
        assert!((chord_arc_ratio(1e-12) - 1.0).abs() < 1e-12);
        for k in 1..=100 {
            let theta = std::f64::consts::PI * k as f64 / 100.0;
            let ratio = chord_arc_ratio(theta);
            assert!(ratio >= 1.0 - 1e-12);
            assert!(ratio <= chord_arc_constant_circle() + 1e-12);
        }
    }

    #[test]
    fn csv_dump_layout() {
        let a = make_annulus(0.5, 1.0).unwrap();
        let m = make_polar_mesh(a, 2, 4).unwrap();
        let csv = m.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i,j,s,theta"));
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,0,0.5,0"));
        // Radial index is the outer loop: nodes of ring 0 come first.
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 8);
        assert!(rows[3].starts_with("0,3,"));
        assert!(rows[4].starts_with("1,0,"));
    }
}
