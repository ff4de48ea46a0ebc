//! Discrete Dirichlet energy, Wirtinger derivatives, and Jacobians on polar
//! meshes.
//!
//! A [`DiscreteMap`] stores node values of a map `f : A(r,1) → ℂ` on a
//! [`PolarMesh`]. All derivatives are taken in the chart `(σ, t) = (log s, t)`,
//! where both steps are uniform, and converted to Wirtinger derivatives via
//! `f_z = e^{-it}(f_σ - i f_t)/(2s)` and `f_z̄ = e^{it}(f_σ + i f_t)/(2s)`.
//!
//! Two radial stencil families are kept deliberately distinct:
//!
//! * **Diagnostic stencils** ([`wirtinger`], [`jacobian`]) are fitted to be
//!   exact on the span `{1, s, 1/s}` — the radial building blocks of the
//!   affine maps `a/z̄ + bz` — including one-sided second-order rows at both
//!   radial boundaries. These give clean pointwise derivative fields.
//! * **Energy stencils** ([`dirichlet_energy`], [`energy_gradient`]) pair a
//!   first-derivative operator with the mesh's radial norm weights so that
//!   summation by parts holds exactly. The reported gradient is the exact
//!   derivative of the discrete energy with respect to the node values, which
//!   is what a line-search minimizer needs; in particular the sampled identity
//!   between identical annuli has exactly vanishing interior gradient.
//!
//! The energy of `f` against a conformal density `ρ` is
//! `E = 2∫ (|f_z|² + |f_z̄|²) ρ²(f) dλ = ∫ (|f_σ|² + |f_t|²) ρ²(f) dσ dt`,
//! discretized by the weighted node sum. The defect `4∫ |f_z̄|² ρ²` is
//! accumulated from the same derivative grids, so the split
//! `energy = 2·(Jacobian part) + defect` holds exactly at the discrete level
//! and the defect is nonnegative term by term.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use thiserror::Error;

use crate::geometry::{make_annulus, make_polar_mesh, PolarMesh};
use crate::metrics::{self, Metric, MetricError};
use crate::radial::AnalyticMap;
use crate::Complex64;

/// Errors from discrete-map construction and energy evaluation.
#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("derivative stencils need at least 3 radial rings and 4 angular nodes, got {nr}x{nt}")]
    MeshTooSmall { nr: usize, nt: usize },
    #[error("value grid is {rows}x{cols} but the mesh is {nr}x{nt}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        nr: usize,
        nt: usize,
    },
    #[error("map value at node ({i}, {j}) is not finite")]
    NonFiniteValue { i: usize, j: usize },
    #[error("map leaves the metric's domain at node ({i}, {j}): {source}")]
    MetricDomain {
        i: usize,
        j: usize,
        source: MetricError,
    },
    #[error("metric area over the image annulus failed: {source}")]
    AreaBound { source: MetricError },
    #[error("map CSV line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
}

// ---------------------------------------------------------------------------
// Discrete maps
// ---------------------------------------------------------------------------

/// Node samples of a map on a polar mesh, with orientation bookkeeping.
///
/// `orientation` is the majority sign of the discrete Jacobian (`+1` on
/// ties); `mixed_jacobian` flags sign changes, i.e. a non-homeomorphic
/// discrete map.
#[derive(Debug, Clone)]
pub struct DiscreteMap {
    mesh: PolarMesh,
    values: Array2<Complex64>,
    orientation: i8,
    mixed_jacobian: bool,
}

impl DiscreteMap {
    /// Samples `f` at every mesh node.
    pub fn from_fn(
        mesh: &PolarMesh,
        f: impl Fn(Complex64) -> Complex64,
    ) -> Result<Self, EnergyError> {
        let (nr, nt) = (mesh.n_radial(), mesh.n_angular());
        let mut values = Array2::zeros((nr, nt));
        for i in 0..nr {
            for j in 0..nt {
                values[[i, j]] = f(mesh.node(i, j));
            }
        }
        Self::from_values(mesh, values)
    }

    /// Samples a closed-form map at every mesh node.
    pub fn from_analytic(mesh: &PolarMesh, map: &AnalyticMap) -> Result<Self, EnergyError> {
        Self::from_fn(mesh, |z| map.eval(z))
    }

    /// Wraps an existing value grid after validating shape and finiteness.
    pub fn from_values(mesh: &PolarMesh, values: Array2<Complex64>) -> Result<Self, EnergyError> {
        let (nr, nt) = (mesh.n_radial(), mesh.n_angular());
        let (rows, cols) = values.dim();
        if (rows, cols) != (nr, nt) {
            return Err(EnergyError::ShapeMismatch { rows, cols, nr, nt });
        }
        for ((i, j), v) in values.indexed_iter() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(EnergyError::NonFiniteValue { i, j });
            }
        }
        let (orientation, mixed_jacobian) = if nr >= 3 {
            let st = MeshStencils::new(mesh);
            let jac = st.jacobian_diag(&values);
            let pos = jac.iter().filter(|&&v| v > 0.0).count();
            let neg = jac.iter().filter(|&&v| v < 0.0).count();
            (if neg > pos { -1 } else { 1 }, pos > 0 && neg > 0)
        } else {
            (1, false)
        };
        Ok(DiscreteMap {
            mesh: mesh.clone(),
            values,
            orientation,
            mixed_jacobian,
        })
    }

    /// The underlying mesh.
    pub fn mesh(&self) -> &PolarMesh {
        &self.mesh
    }

    /// The node value grid, indexed `[ring][angle]`.
    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    /// Majority orientation sign of the discrete Jacobian (`+1` or `-1`).
    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    /// True when the discrete Jacobian changes sign somewhere on the grid.
    pub fn mixed_jacobian(&self) -> bool {
        self.mixed_jacobian
    }

    /// Bilinear interpolation in `(log s, t)`, with angular wraparound.
    ///
    /// The radial coordinate is clamped to the mesh's radial span, so points
    /// slightly off the annulus evaluate to boundary-ring values.
    pub fn interp(&self, z: Complex64) -> Complex64 {
        let nr = self.mesh.n_radial();
        let nt = self.mesh.n_angular();
        let sigma0 = self.mesh.radius(0).ln();
        let u = ((z.norm().ln() - sigma0) / self.mesh.d_sigma()).clamp(0.0, (nr - 1) as f64);
        let i0 = (u.floor() as usize).min(nr - 2);
        let fu = u - i0 as f64;
        let mut t = z.arg();
        if t < 0.0 {
            t += TAU;
        }
        let v = t / self.mesh.d_theta();
        let j0 = (v.floor() as usize).min(nt - 1);
        let fv = v - j0 as f64;
        let j1 = (j0 + 1) % nt;
        let lo = self.values[[i0, j0]] * (1.0 - fv) + self.values[[i0, j1]] * fv;
        let hi = self.values[[i0 + 1, j0]] * (1.0 - fv) + self.values[[i0 + 1, j1]] * fv;
        lo * (1.0 - fu) + hi * fu
    }

    /// CSV dump of the node values with header `i,j,s,theta,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,s,theta,re,im\n");
        for i in 0..self.mesh.n_radial() {
            for j in 0..self.mesh.n_angular() {
                let v = self.values[[i, j]];
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    i,
                    j,
                    self.mesh.radius(i),
                    self.mesh.angle(j),
                    v.re,
                    v.im
                )
                .expect("writing to a String cannot fail");
            }
        }
        out
    }

    /// Rebuilds a map from a [`DiscreteMap::to_csv`] dump.
    ///
    /// The mesh is inferred from the index and coordinate columns: ring and
    /// angle counts from the `i`/`j` ranges, the annulus from the first and
    /// last ring radii. Every node's `(s, theta)` is then cross-checked
    /// against the reconstructed mesh, so a CSV that is not a log-spaced
    /// polar-mesh dump is rejected instead of being silently misread.
    pub fn from_csv(text: &str) -> Result<Self, EnergyError> {
        let bad = |line: usize, reason: String| EnergyError::MalformedCsv { line, reason };
        let mut lines = text
            .lines()
            .map(str::trim)
            .enumerate()
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines
            .next()
            .ok_or_else(|| bad(1, "empty file".to_string()))?;
        if header != "i,j,s,theta,re,im" {
            return Err(bad(
                line_no + 1,
                format!("expected header 'i,j,s,theta,re,im', got '{header}'"),
            ));
        }

        struct Row {
            i: usize,
            j: usize,
            s: f64,
            theta: f64,
            value: Complex64,
        }
        let mut rows: Vec<Row> = Vec::new();
        let mut nr = 0usize;
        let mut nt = 0usize;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(bad(line_no, format!("expected 6 fields, got {}", fields.len())));
            }
            let parse_int = |k: usize, name: &str| -> Result<usize, EnergyError> {
                fields[k]
                    .parse()
                    .map_err(|_| bad(line_no, format!("{name} '{}' is not an index", fields[k])))
            };
            let parse_num = |k: usize, name: &str| -> Result<f64, EnergyError> {
                fields[k]
                    .parse()
                    .map_err(|_| bad(line_no, format!("{name} '{}' is not a number", fields[k])))
            };
            let row = Row {
                i: parse_int(0, "i")?,
                j: parse_int(1, "j")?,
                s: parse_num(2, "s")?,
                theta: parse_num(3, "theta")?,
                value: Complex64::new(parse_num(4, "re")?, parse_num(5, "im")?),
            };
            nr = nr.max(row.i + 1);
            nt = nt.max(row.j + 1);
            rows.push(row);
        }
        if nr < 2 || nt < 4 {
            return Err(bad(
                2,
                format!("grid {nr}x{nt} is below the 2x4 polar-mesh minimum"),
            ));
        }
        if rows.len() != nr * nt {
            return Err(bad(
                2,
                format!("expected {} rows for a {nr}x{nt} grid, got {}", nr * nt, rows.len()),
            ));
        }

        let radius_of = |ring: usize| -> f64 {
            rows.iter()
                .find(|r| r.i == ring)
                .map(|r| r.s)
                .unwrap_or(f64::NAN)
        };
        let (inner, outer) = (radius_of(0), radius_of(nr - 1));
        let annulus = make_annulus(inner, outer).map_err(|e| bad(2, e.to_string()))?;
        let mesh = make_polar_mesh(annulus, nr, nt).map_err(|e| bad(2, e.to_string()))?;

        let mut values = Array2::from_elem((nr, nt), Complex64::new(f64::NAN, f64::NAN));
        let mut seen = Array2::from_elem((nr, nt), false);
        for row in &rows {
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs() + b.abs());
            if !close(row.s, mesh.radius(row.i)) || !close(row.theta, mesh.angle(row.j)) {
                return Err(bad(
                    2,
                    format!(
                        "node ({}, {}) sits at (s, theta) = ({}, {}), not on the log-spaced \
                         polar mesh expected from the index ranges",
                        row.i, row.j, row.s, row.theta
                    ),
                ));
            }
            if seen[[row.i, row.j]] {
                return Err(bad(2, format!("duplicate node ({}, {})", row.i, row.j)));
            }
            seen[[row.i, row.j]] = true;
            values[[row.i, row.j]] = row.value;
        }
        Self::from_values(&mesh, values)
    }
}

// ---------------------------------------------------------------------------
// Stencil kernels
// ---------------------------------------------------------------------------

/// Precomputed stencil coefficients and mesh data for derivative and energy
/// kernels. Shared by the public operations here and by the minimizer's hot
/// loop.
pub(crate) struct MeshStencils {
    nr: usize,
    nt: usize,
    radii: Vec<f64>,
    /// Radial norm weights `h_i` (the mesh's trapezoid-like weights in σ).
    weights: Vec<f64>,
    d_theta: f64,
    /// 1/(2 sinh Δσ): centered radial derivative, exact on `{1, s, 1/s}`.
    inv_two_sinh: f64,
    /// 1/(x−1) with `x = e^{Δσ}`: energy-operator forward row at the inner
    /// ring, exact on `{1, s}`.
    inv_lower: f64,
    /// 1/(1−1/x): energy-operator backward row at the outer ring.
    inv_upper: f64,
    /// One-sided diagnostic row at the inner ring, exact on `{1, s, 1/s}`.
    diag0: f64,
    diag1: f64,
    diag2: f64,
    /// 1/(2 cosh Δσ − 2): centered radial second difference, exact on the
    /// same exponential family.
    inv_sigma2: f64,
    /// 1/(2 sin Δt): centered angular derivative, exact on `e^{±it}`.
    inv_two_sin: f64,
    /// 1/(4 sin²(Δt/2)): centered angular second difference.
    inv_theta2: f64,
    /// `e^{i t_j}` per angular node, for Wirtinger conversions.
    phases: Vec<Complex64>,
}

impl MeshStencils {
    pub(crate) fn new(mesh: &PolarMesh) -> Self {
        let nr = mesh.n_radial();
        let nt = mesh.n_angular();
        let ds = mesh.d_sigma();
        let dt = mesh.d_theta();
        let x = ds.exp();
        // Fitted one-sided row: coefficients (diag0, diag1, diag2) on nodes
        // (0, 1, 2) reproducing d/dσ exactly for f ∈ {1, e^σ, e^{-σ}}.
        let diag2 = -1.0 / (2.0 * ds.sinh());
        let diag1 = (1.0 + x) / (x - 1.0);
        let diag0 = -diag1 - diag2;
        MeshStencils {
            nr,
            nt,
            radii: mesh.radii().to_vec(),
            weights: (0..nr).map(|i| mesh.radial_weight(i)).collect(),
            d_theta: dt,
            inv_two_sinh: 1.0 / (2.0 * ds.sinh()),
            inv_lower: 1.0 / (x - 1.0),
            inv_upper: 1.0 / (1.0 - 1.0 / x),
            diag0,
            diag1,
            diag2,
            inv_sigma2: 1.0 / (2.0 * ds.cosh() - 2.0),
            inv_two_sin: 1.0 / (2.0 * dt.sin()),
            inv_theta2: 1.0 / (4.0 * (0.5 * dt).sin().powi(2)),
            phases: mesh
                .angles()
                .iter()
                .map(|&t| Complex64::from_polar(1.0, t))
                .collect(),
        }
    }

    fn flat(f: &Array2<Complex64>) -> &[Complex64] {
        f.as_slice().expect("grids use standard layout")
    }

    /// σ-derivative with the energy operator: forward/backward boundary rows
    /// paired with the radial norm weights to give summation by parts.
    pub(crate) fn sigma_deriv_energy(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let (nr, nt) = (self.nr, self.nt);
        let fv = Self::flat(f);
        let mut out = Array2::zeros((nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                if i == 0 {
                    for j in 0..nt {
                        row[j] = (fv[nt + j] - fv[j]) * self.inv_lower;
                    }
                } else if i == nr - 1 {
                    for j in 0..nt {
                        row[j] = (fv[i * nt + j] - fv[(i - 1) * nt + j]) * self.inv_upper;
                    }
                } else {
                    for j in 0..nt {
                        row[j] = (fv[(i + 1) * nt + j] - fv[(i - 1) * nt + j]) * self.inv_two_sinh;
                    }
                }
            });
        out
    }

    /// σ-derivative with the diagnostic operator: one-sided fitted rows at
    /// both boundaries, exact on `{1, s, 1/s}` everywhere.
    pub(crate) fn sigma_deriv_diag(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let (nr, nt) = (self.nr, self.nt);
        assert!(nr >= 3, "diagnostic stencils need at least 3 rings");
        let fv = Self::flat(f);
        let mut out = Array2::zeros((nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                if i == 0 {
                    for j in 0..nt {
                        row[j] = fv[j] * self.diag0
                            + fv[nt + j] * self.diag1
                            + fv[2 * nt + j] * self.diag2;
                    }
                } else if i == nr - 1 {
                    // Mirror of the inner row; the sign flips with the
                    // direction of traversal.
                    for j in 0..nt {
                        row[j] = -(fv[i * nt + j] * self.diag0
                            + fv[(i - 1) * nt + j] * self.diag1
                            + fv[(i - 2) * nt + j] * self.diag2);
                    }
                } else {
                    for j in 0..nt {
                        row[j] = (fv[(i + 1) * nt + j] - fv[(i - 1) * nt + j]) * self.inv_two_sinh;
                    }
                }
            });
        out
    }

    /// t-derivative, centered and periodic, exact on `e^{±it}`.
    pub(crate) fn theta_deriv(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let nt = self.nt;
        let fv = Self::flat(f);
        let mut out = Array2::zeros((self.nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                let base = i * nt;
                for j in 0..nt {
                    let jp = if j + 1 == nt { 0 } else { j + 1 };
                    let jm = if j == 0 { nt - 1 } else { j - 1 };
                    row[j] = (fv[base + jp] - fv[base + jm]) * self.inv_two_sin;
                }
            });
        out
    }

    /// Nonzero entries `(column, coefficient)` of row `i` of the energy
    /// σ-derivative operator.
    fn energy_row(&self, i: usize) -> [(usize, f64); 2] {
        if i == 0 {
            [(0, -self.inv_lower), (1, self.inv_lower)]
        } else if i == self.nr - 1 {
            [(i - 1, -self.inv_upper), (i, self.inv_upper)]
        } else {
            [(i - 1, -self.inv_two_sinh), (i + 1, self.inv_two_sinh)]
        }
    }

    /// Transpose-apply of the energy σ-derivative operator (gather form).
    fn sigma_transpose(&self, v: &Array2<Complex64>) -> Array2<Complex64> {
        let (nr, nt) = (self.nr, self.nt);
        let vv = Self::flat(v);
        let mut out = Array2::zeros((nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(m, row)| {
                let lo = m.saturating_sub(1);
                let hi = (m + 1).min(nr - 1);
                for i in lo..=hi {
                    for (col, coef) in self.energy_row(i) {
                        if col == m {
                            for j in 0..nt {
                                row[j] += vv[i * nt + j] * coef;
                            }
                        }
                    }
                }
            });
        out
    }

    /// Transpose-apply of the angular derivative; the centered periodic
    /// operator is antisymmetric, so this is its negative.
    fn theta_transpose(&self, v: &Array2<Complex64>) -> Array2<Complex64> {
        let nt = self.nt;
        let vv = Self::flat(v);
        let mut out = Array2::zeros((self.nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                let base = i * nt;
                for j in 0..nt {
                    let jp = if j + 1 == nt { 0 } else { j + 1 };
                    let jm = if j == 0 { nt - 1 } else { j - 1 };
                    row[j] = (vv[base + jm] - vv[base + jp]) * self.inv_two_sin;
                }
            });
        out
    }

    /// Centered second difference in σ at interior rings; boundary rows are
    /// left at zero and must not be consumed.
    pub(crate) fn sigma_second(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let (nr, nt) = (self.nr, self.nt);
        let fv = Self::flat(f);
        let mut out = Array2::zeros((nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                if i > 0 && i < nr - 1 {
                    for j in 0..nt {
                        row[j] = (fv[(i + 1) * nt + j] - fv[i * nt + j] * 2.0
                            + fv[(i - 1) * nt + j])
                            * self.inv_sigma2;
                    }
                }
            });
        out
    }

    /// Centered periodic second difference in t.
    pub(crate) fn theta_second(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let nt = self.nt;
        let fv = Self::flat(f);
        let mut out = Array2::zeros((self.nr, nt));
        out.as_slice_mut()
            .expect("grids use standard layout")
            .par_chunks_mut(nt)
            .enumerate()
            .for_each(|(i, row)| {
                let base = i * nt;
                for j in 0..nt {
                    let jp = if j + 1 == nt { 0 } else { j + 1 };
                    let jm = if j == 0 { nt - 1 } else { j - 1 };
                    row[j] =
                        (fv[base + jp] - fv[base + j] * 2.0 + fv[base + jm]) * self.inv_theta2;
                }
            });
        out
    }

    /// Laplacian-type mixed derivative `f_zz̄ = (f_σσ + f_tt)/(4s²)` at
    /// interior rings; boundary rows are zero.
    pub(crate) fn mixed_second(&self, f: &Array2<Complex64>) -> Array2<Complex64> {
        let fss = self.sigma_second(f);
        let ftt = self.theta_second(f);
        let mut out = fss + ftt;
        for (i, mut row) in out.outer_iter_mut().into_iter().enumerate() {
            if i == 0 || i == self.nr - 1 {
                row.fill(Complex64::new(0.0, 0.0));
            } else {
                let scale = 1.0 / (4.0 * self.radii[i] * self.radii[i]);
                row.mapv_inplace(|v| v * scale);
            }
        }
        out
    }

    /// Converts `(f_σ, f_t)` grids to `(f_z, f_z̄)` grids.
    pub(crate) fn to_wirtinger(
        &self,
        fsig: &Array2<Complex64>,
        fth: &Array2<Complex64>,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        let (nr, nt) = (self.nr, self.nt);
        let mut fz = Array2::zeros((nr, nt));
        let mut fzb = Array2::zeros((nr, nt));
        for i in 0..nr {
            let half_inv_s = 0.5 / self.radii[i];
            for j in 0..nt {
                let a = fsig[[i, j]];
                let b = fth[[i, j]];
                let phase = self.phases[j];
                fz[[i, j]] = phase.conj() * (a - Complex64::i() * b) * half_inv_s;
                fzb[[i, j]] = phase * (a + Complex64::i() * b) * half_inv_s;
            }
        }
        (fz, fzb)
    }

    /// Diagnostic Wirtinger pair for a value grid.
    pub(crate) fn wirtinger_diag(
        &self,
        f: &Array2<Complex64>,
    ) -> (Array2<Complex64>, Array2<Complex64>) {
        let fsig = self.sigma_deriv_diag(f);
        let fth = self.theta_deriv(f);
        self.to_wirtinger(&fsig, &fth)
    }

    /// Discrete Jacobian `|f_z|² − |f_z̄|²` from the diagnostic stencils.
    pub(crate) fn jacobian_diag(&self, f: &Array2<Complex64>) -> Array2<f64> {
        let (fz, fzb) = self.wirtinger_diag(f);
        let mut out = Array2::zeros((self.nr, self.nt));
        for i in 0..self.nr {
            for j in 0..self.nt {
                out[[i, j]] = fz[[i, j]].norm_sqr() - fzb[[i, j]].norm_sqr();
            }
        }
        out
    }

    /// Energy and defect of a value grid against a metric density.
    ///
    /// Returns `(energy, defect)` where
    /// `energy = Σ h_i Δt (|f_σ|² + |f_t|²) ρ²(f)` and
    /// `defect = Σ h_i Δt |f_σ + i f_t|² ρ²(f) = 4∫|f_z̄|²ρ² ≥ 0`.
    /// Rows are reduced in parallel; the final accumulation runs in ring
    /// order, so the result does not depend on the thread count.
    pub(crate) fn energy_parts(
        &self,
        m: &Metric,
        f: &Array2<Complex64>,
    ) -> Result<(f64, f64), EnergyError> {
        let fsig = self.sigma_deriv_energy(f);
        let fth = self.theta_deriv(f);
        let rows: Result<Vec<(f64, f64)>, EnergyError> = (0..self.nr)
            .into_par_iter()
            .map(|i| {
                let mut e = 0.0;
                let mut d = 0.0;
                for j in 0..self.nt {
                    let rho = metrics::rho(m, f[[i, j]])
                        .map_err(|source| EnergyError::MetricDomain { i, j, source })?;
                    let rho2 = rho * rho;
                    let a = fsig[[i, j]];
                    let b = fth[[i, j]];
                    e += (a.norm_sqr() + b.norm_sqr()) * rho2;
                    d += (a + Complex64::i() * b).norm_sqr() * rho2;
                }
                let w = self.weights[i] * self.d_theta;
                Ok((w * e, w * d))
            })
            .collect();
        let rows = rows?;
        let mut energy = 0.0;
        let mut defect = 0.0;
        for (e, d) in rows {
            energy += e;
            defect += d;
        }
        Ok((energy, defect))
    }

    /// Exact gradient of the discrete energy with respect to the node values,
    /// as the complex Wirtinger gradient `2 ∂E/∂f̄` (so that the real
    /// directional derivative along `δ` is `Re Σ g δ̄`).
    pub(crate) fn gradient(
        &self,
        m: &Metric,
        f: &Array2<Complex64>,
    ) -> Result<Array2<Complex64>, EnergyError> {
        let (nr, nt) = (self.nr, self.nt);
        let fsig = self.sigma_deriv_energy(f);
        let fth = self.theta_deriv(f);
        let mut wa = Array2::<Complex64>::zeros((nr, nt));
        let mut wb = Array2::<Complex64>::zeros((nr, nt));
        let mut extra = Array2::<Complex64>::zeros((nr, nt));
        {
            let fv = Self::flat(f);
            let fs = Self::flat(&fsig);
            let ft = Self::flat(&fth);
            let wa_s = wa.as_slice_mut().expect("grids use standard layout");
            let wb_s = wb.as_slice_mut().expect("grids use standard layout");
            let ex_s = extra.as_slice_mut().expect("grids use standard layout");
            wa_s.par_chunks_mut(nt)
                .zip(wb_s.par_chunks_mut(nt))
                .zip(ex_s.par_chunks_mut(nt))
                .enumerate()
                .try_for_each(|(i, ((wa_row, wb_row), ex_row))| -> Result<(), EnergyError> {
                    let w = self.weights[i] * self.d_theta;
                    for j in 0..nt {
                        let z = fv[i * nt + j];
                        let rho = metrics::rho(m, z)
                            .map_err(|source| EnergyError::MetricDomain { i, j, source })?;
                        let grad = metrics::grad_log_rho(m, z)
                            .map_err(|source| EnergyError::MetricDomain { i, j, source })?;
                        let wr2 = w * rho * rho;
                        let a = fs[i * nt + j];
                        let b = ft[i * nt + j];
                        wa_row[j] = a * wr2;
                        wb_row[j] = b * wr2;
                        // ∂(ρ²(f))/∂f̄ = ρ² ∇log ρ (complex gradient), scaled
                        // by the Dirichlet density at the node.
                        ex_row[j] = grad * (wr2 * (a.norm_sqr() + b.norm_sqr()));
                    }
                    Ok(())
                })?;
        }
        let gs = self.sigma_transpose(&wa);
        let gt = self.theta_transpose(&wb);
        let mut out = gs + gt + extra;
        out.mapv_inplace(|v| v * 2.0);
        Ok(out)
    }
}

fn require_stencil_mesh(mesh: &PolarMesh) -> Result<(), EnergyError> {
    let (nr, nt) = (mesh.n_radial(), mesh.n_angular());
    if nr < 3 || nt < 4 {
        return Err(EnergyError::MeshTooSmall { nr, nt });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Wirtinger derivative grids `(f_z, f_z̄)` of a discrete map, via centered
/// differences in `(log s, t)` with one-sided fitted rows at the radial
/// boundaries. Exact for the affine family `a/z̄ + bz`.
pub fn wirtinger(
    map: &DiscreteMap,
) -> Result<(Array2<Complex64>, Array2<Complex64>), EnergyError> {
    require_stencil_mesh(map.mesh())?;
    let st = MeshStencils::new(map.mesh());
    Ok(st.wirtinger_diag(map.values()))
}

/// Discrete Jacobian grid `J = |f_z|² − |f_z̄|²`.
pub fn jacobian(map: &DiscreteMap) -> Result<Array2<f64>, EnergyError> {
    require_stencil_mesh(map.mesh())?;
    let st = MeshStencils::new(map.mesh());
    Ok(st.jacobian_diag(map.values()))
}

/// Energy summary of a discrete map against a metric density.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Discrete Dirichlet energy `2∫(|f_z|² + |f_z̄|²) ρ²(f) dλ`.
    pub energy: f64,
    /// Twice the metric area of the image annulus `[min|f|, max|f|]` — the
    /// value the energy of a conformal diffeomorphism onto that annulus
    /// would attain, and a lower bound for orientation-preserving maps.
    pub area_bound: f64,
    /// Conformality defect `4∫|f_z̄|² ρ²(f) dλ ≥ 0`; the energy minus twice
    /// the ρ²-weighted Jacobian integral, exactly, at the discrete level.
    pub defect: f64,
    /// Minimum of the discrete Jacobian over all nodes.
    pub min_jacobian: f64,
}

/// Evaluates the discrete Dirichlet energy of `map` against the density of
/// `m`, along with the conformality defect, the image-area lower bound, and
/// the minimal Jacobian.
pub fn dirichlet_energy(map: &DiscreteMap, m: &Metric) -> Result<EnergyReport, EnergyError> {
    require_stencil_mesh(map.mesh())?;
    let st = MeshStencils::new(map.mesh());
    let (energy, defect) = st.energy_parts(m, map.values())?;
    let jac = st.jacobian_diag(map.values());
    let min_jacobian = jac.iter().copied().fold(f64::INFINITY, f64::min);
    let mut r_lo = f64::INFINITY;
    let mut r_hi = 0.0_f64;
    for v in map.values() {
        let r = v.norm();
        r_lo = r_lo.min(r);
        r_hi = r_hi.max(r);
    }
    // Degenerate images (for instance near-constant maps) have no annulus to
    // integrate over; their area bound is zero.
    let area_bound = if r_lo > 0.0 && r_lo < r_hi * (1.0 - 1e-12) {
        let image = crate::geometry::make_annulus(r_lo, r_hi)
            .expect("image radii were checked to be ordered and positive");
        2.0 * metrics::area(m, &metrics::Domain::Annulus(image), 64)
            .map_err(|source| EnergyError::AreaBound { source })?
    } else {
        0.0
    };
    Ok(EnergyReport {
        energy,
        area_bound,
        defect,
        min_jacobian,
    })
}

/// Gradient of the discrete energy with respect to the node values, as a
/// complex grid `g = 2 ∂E/∂f̄`; the directional derivative along a
/// perturbation `δ` is `Re Σ g δ̄`.
///
/// The operator pair behind the energy satisfies summation by parts, so this
/// is the exact derivative of [`dirichlet_energy`]'s `energy` field. At
/// interior nodes it is a cell-area-weighted discrete tension field.
pub fn energy_gradient(map: &DiscreteMap, m: &Metric) -> Result<Array2<Complex64>, EnergyError> {
    require_stencil_mesh(map.mesh())?;
    let st = MeshStencils::new(map.mesh());
    st.gradient(m, map.values())
}
