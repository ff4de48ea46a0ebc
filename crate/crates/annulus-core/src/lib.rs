//! Numerical machinery for energy-minimizing maps between circular annuli.
//!
//! The crate provides, as a library:
//!
//! * [`geometry`] — annuli, polar meshes in (log-radius × angle), conformal
//!   modulus, and circle chord-arc constants;
//! * [`metrics`] — conformal target densities ρ (euclidean, spherical-type,
//!   hyperbolic-type, tabulated radial, or user closures) with curvature,
//!   area, and admissibility reporting;
//! * [`radial`] — exact radial harmonic-map machinery: the one-parameter
//!   family of radial minimizers, the critical parameter and critical inner
//!   radius, and closed-form euclidean minimizers with exact derivative
//!   evaluators;
//! * [`energy`] — discrete Dirichlet energy, Wirtinger derivative grids and
//!   Jacobians on polar meshes, and the exact adjoint energy gradient;
//! * [`solver`] — projected gradient descent with sliding circular boundary
//!   values, plus a bisection explorer for the smallest feasible inner radius;
//! * [`diagnostics`] — structural verifiers: quadratic-differential fit,
//!   quasiconformality report, boundary Hölder-exponent estimation, and
//!   square-root/Hölder-halving utilities;
//! * [`potential`] — Poisson integral and Green potential on the unit disk and
//!   the harmonic + potential decomposition;
//! * [`report`] — deterministic, serializable report bodies shared by the CLI
//!   and the test suite.
//!
//! All floating-point pipelines are deterministic: parallel loops only fill
//! independent slots and every reduction runs in a fixed order, so results are
//! bit-identical regardless of worker-thread count.

pub mod diagnostics;
pub mod energy;
pub mod geometry;
mod interp;
pub mod metrics;
pub mod potential;
mod quad;
pub mod radial;
pub mod report;
pub mod solver;

/// Complex scalar used throughout the crate.
pub type Complex64 = num_complex::Complex<f64>;
