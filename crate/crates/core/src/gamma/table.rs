use serde::Serialize;

use super::GammaError;
use crate::linalg::solve_tridiagonal;

/// Clamped cubic spline through `(xi, gamma)` knots.
///
/// End slopes are clamped to zero and the table is extended by its end values
/// outside the knot range, so the interpolant is C² between the first and last
/// knot and constant beyond them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubicTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    #[serde(skip)]
    m: Vec<f64>,
}

impl CubicTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, GammaError> {
        let invalid = |reason: &str| GammaError::InvalidParameter {
            family: "tabulated",
            reason: reason.to_string(),
        };
        if xs.len() != ys.len() {
            return Err(invalid("knot and value counts differ"));
        }
        if xs.len() < 2 {
            return Err(invalid("at least two knots are required"));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("knots and values must be finite"));
        }
        if xs[0] < 0.0 {
            return Err(invalid("first knot must be >= 0"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("knot abscissae must be strictly increasing"));
        }
        if ys.iter().any(|&y| y <= 0.0) {
            return Err(invalid("tabulated values must be > 0"));
        }
        let m = clamped_second_derivatives(&xs, &ys);
        Ok(Self { xs, ys, m })
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (self.ys[0], 0.0, 0.0);
        }
        if x >= self.xs[n - 1] {
            return (self.ys[n - 1], 0.0, 0.0);
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let h = x1 - x0;
        let l = x1 - x;
        let r = x - x0;
        let c0 = y0 / h - m0 * h / 6.0;
        let c1 = y1 / h - m1 * h / 6.0;
        let value = m0 * l * l * l / (6.0 * h) + m1 * r * r * r / (6.0 * h) + c0 * l + c1 * r;
        let d1 = -m0 * l * l / (2.0 * h) + m1 * r * r / (2.0 * h) - c0 + c1;
        let d2 = (m0 * l + m1 * r) / h;
        (value, d1, d2)
    }
}

fn clamped_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    diag[0] = 2.0 * h[0];
    upper[0] = h[0];
    rhs[0] = 6.0 * slope[0];
    for i in 1..n - 1 {
        lower[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        upper[i] = h[i];
        rhs[i] = 6.0 * (slope[i] - slope[i - 1]);
    }
    lower[n - 1] = h[n - 2];
    diag[n - 1] = 2.0 * h[n - 2];
    rhs[n - 1] = -6.0 * slope[n - 2];
    let mut scratch = vec![0.0; n];
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs, &mut scratch);
    rhs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots_and_clamps_ends() {
        let t = CubicTable::new(vec![0.0, 1.0, 2.0, 4.0], vec![1.0, 1.5, 1.8, 2.0]).unwrap();
        for (x, y) in t.knots().iter().zip(t.values()) {
            assert!((t.eval(*x).0 - y).abs() < 1e-14);
        }
        let (_, d1_start, _) = t.eval(1e-12);
        assert!(d1_start.abs() < 1e-9);
        assert_eq!(t.eval(10.0), (2.0, 0.0, 0.0));
    }

    #[test]
    fn second_derivative_is_continuous_at_interior_knots() {
        let t = CubicTable::new(vec![0.0, 0.5, 1.5, 3.0], vec![1.0, 1.4, 1.9, 2.1]).unwrap();
        for &k in &t.knots()[1..3] {
            let left = t.eval(k - 1e-9);
            let right = t.eval(k + 1e-9);
            assert!((left.1 - right.1).abs() < 1e-6);
            assert!((left.2 - right.2).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(CubicTable::new(vec![0.0], vec![1.0]).is_err());
        assert!(CubicTable::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(CubicTable::new(vec![0.0, 1.0], vec![1.0, -2.0]).is_err());
        assert!(CubicTable::new(vec![-1.0, 1.0], vec![1.0, 2.0]).is_err());
    }
}
