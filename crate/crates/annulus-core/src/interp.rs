//! Shape-preserving piecewise-cubic interpolation (Fritsch–Carlson scheme).
//!
//! Used for tabulated radial metric profiles and for inverting sampled
//! monotone functions. The interpolant is C¹, matches the data exactly at the
//! knots, and preserves monotonicity of the data, which keeps interpolated
//! positive quantities positive after exponentiation.

/// Monotone cubic Hermite interpolant on strictly increasing knots.
#[derive(Clone, Debug)]
pub(crate) struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Derivative of the interpolant at each knot.
    m: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant. Requires at least two knots, strictly
    /// increasing and finite `x`, finite `y`.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, String> {
        if x.len() != y.len() {
            return Err(format!(
                "knot count mismatch: {} abscissae vs {} ordinates",
                x.len(),
                y.len()
            ));
        }
        if x.len() < 2 {
            return Err("interpolation needs at least two knots".to_string());
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err("non-finite knot data".to_string());
        }
        for k in 1..x.len() {
            if x[k] <= x[k - 1] {
                return Err(format!(
                    "abscissae must be strictly increasing: x[{}] = {} ≥ x[{}] = {}",
                    k - 1,
                    x[k - 1],
                    k,
                    x[k]
                ));
            }
        }

        let n = x.len();
        let h: Vec<f64> = (0..n - 1).map(|k| x[k + 1] - x[k]).collect();
        let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();

        let mut m = vec![0.0; n];
        if n == 2 {
            m[0] = d[0];
            m[1] = d[0];
        } else {
            for k in 1..n - 1 {
                if d[k - 1] * d[k] <= 0.0 {
                    m[k] = 0.0;
                } else {
                    // Weighted harmonic mean of the neighboring secants.
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
                }
            }
            m[0] = edge_slope(h[0], h[1], d[0], d[1]);
            m[n - 1] = edge_slope(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
        }

        Ok(Self { x, y, m })
    }

    /// Index of the segment containing `x` (clamped to the knot range).
    fn segment(&self, x: f64) -> usize {
        let n = self.x.len();
        if x <= self.x[0] {
            return 0;
        }
        if x >= self.x[n - 2] {
            return n - 2;
        }
        // partition_point returns the first index with knot > x.
        self.x.partition_point(|&k| k <= x) - 1
    }

    /// Evaluates the interpolant; arguments outside the knot range evaluate
    /// the boundary cubic (smooth extrapolation of the end segment).
    pub fn eval(&self, xq: f64) -> f64 {
        let k = self.segment(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let (h00, h10, h01, h11) = hermite(t);
        h00 * self.y[k] + h10 * h * self.m[k] + h01 * self.y[k + 1] + h11 * h * self.m[k + 1]
    }

    /// First derivative of the interpolant.
    pub fn deriv(&self, xq: f64) -> f64 {
        let k = self.segment(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let (g00, g10, g01, g11) = hermite_d(t);
        (g00 * self.y[k] + g01 * self.y[k + 1]) / h + g10 * self.m[k] + g11 * self.m[k + 1]
    }

    /// Second derivative of the interpolant (piecewise linear, discontinuous
    /// at knots; the left-segment value is returned at interior knots).
    pub fn second_deriv(&self, xq: f64) -> f64 {
        let k = self.segment(xq);
        let h = self.x[k + 1] - self.x[k];
        let t = (xq - self.x[k]) / h;
        let (s00, s10, s01, s11) = hermite_dd(t);
        (s00 * self.y[k] + s01 * self.y[k + 1]) / (h * h) + (s10 * self.m[k] + s11 * self.m[k + 1]) / h
    }
}

/// Non-centered boundary slope with the usual shape-preserving limiter.
fn edge_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let mut m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        m = 0.0;
    } else if d0 * d1 < 0.0 && m.abs() > 3.0 * d0.abs() {
        m = 3.0 * d0;
    }
    m
}

/// Cubic Hermite basis at parameter `t`.
fn hermite(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// Derivative of the Hermite basis with respect to `t`.
fn hermite_d(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    (
        6.0 * t2 - 6.0 * t,
        3.0 * t2 - 4.0 * t + 1.0,
        -6.0 * t2 + 6.0 * t,
        3.0 * t2 - 2.0 * t,
    )
}

/// Second derivative of the Hermite basis with respect to `t`.
fn hermite_dd(t: f64) -> (f64, f64, f64, f64) {
    (
        12.0 * t - 6.0,
        6.0 * t - 4.0,
        -12.0 * t + 6.0,
        6.0 * t - 2.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knot_values_exactly() {
        let x = vec![0.0, 0.5, 1.3, 2.0, 3.1];
        let y = vec![1.0, 2.0, 2.5, 2.6, 4.0];
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(y.iter()) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn preserves_monotonicity() {
        let x: Vec<f64> = (0..20).map(|k| k as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&v| (v * 0.7).tanh() + 0.01 * v).collect();
        let p = Pchip::new(x, y).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..400 {
            let v = p.eval(k as f64 * 4.75 / 399.0);
            assert!(v >= prev - 1e-13, "interpolant lost monotonicity");
            prev = v;
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let x: Vec<f64> = (0..12).map(|k| k as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|&v| (v + 0.2).ln() + v * v * 0.05).collect();
        let p = Pchip::new(x, y).unwrap();
        // Sample strictly inside segments: the interpolant is C¹ but its
        // second derivative jumps at knots, so centred differences straddling
        // a knot would not match.
        for q in [0.4, 1.0, 1.7, 2.45, 3.05] {
            let eps = 1e-6;
            let fd = (p.eval(q + eps) - p.eval(q - eps)) / (2.0 * eps);
            assert!(
                (p.deriv(q) - fd).abs() < 1e-7,
                "derivative mismatch at {q}: {} vs {}",
                p.deriv(q),
                fd
            );
            let fd2 = (p.eval(q + eps) - 2.0 * p.eval(q) + p.eval(q - eps)) / (eps * eps);
            assert!((p.second_deriv(q) - fd2).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_data_gives_exactly_constant_interpolant() {
        let x = vec![0.1, 0.9, 2.0, 5.0];
        let y = vec![3.0; 4];
        let p = Pchip::new(x, y).unwrap();
        for q in [0.1, 0.3, 1.5, 4.2, 5.0] {
            assert_eq!(p.eval(q), 3.0);
            assert_eq!(p.deriv(q), 0.0);
            assert_eq!(p.second_deriv(q), 0.0);
        }
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(Pchip::new(vec![0.0], vec![1.0]).is_err());
        assert!(Pchip::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(Pchip::new(vec![0.0, 1.0], vec![f64::NAN, 2.0]).is_err());
    }
}
