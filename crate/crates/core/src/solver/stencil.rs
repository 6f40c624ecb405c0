//! Finite-difference stencils on the cell-centred grid.
//!
//! Neumann conditions enter through reflected ghost values `w[-1] = w[0]` and
//! `w[n] = w[n-1]`. For the nodal gradient this is the same as fitting the parabola
//! with zero slope at the wall through the two boundary-adjacent nodes, so the
//! boundary stencil is one-sided and second order for data with `w_x = 0` on the wall.

use crate::gamma::GammaModel;

/// Second-order nodal first derivative.
pub fn nodal_gradient(w: &[f64], dx: f64, out: &mut [f64]) {
    let n = w.len();
    let inv = 0.5 / dx;
    out[0] = (w[1] - w[0]) * inv;
    for i in 1..n - 1 {
        out[i] = (w[i + 1] - w[i - 1]) * inv;
    }
    out[n - 1] = (w[n - 1] - w[n - 2]) * inv;
}

/// Three-point second difference.
pub fn laplacian(w: &[f64], dx: f64, out: &mut [f64]) {
    let n = w.len();
    let inv = 1.0 / (dx * dx);
    out[0] = (w[1] - w[0]) * inv;
    for i in 1..n - 1 {
        out[i] = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * inv;
    }
    out[n - 1] = (w[n - 2] - w[n - 1]) * inv;
}

/// Interior face coefficients `gamma((theta_i + theta_{i+1}) / 2)`, `n - 1` of them.
pub fn face_coefficients(theta: &[f64], gamma: &GammaModel, out: &mut [f64]) {
    for (k, pair) in theta.windows(2).enumerate() {
        out[k] = gamma.value(0.5 * (pair[0] + pair[1]));
    }
}

/// `(F_{i+1/2} - F_{i-1/2}) / dx` with `F = k (v_{i+1} - v_i) / dx` and zero wall fluxes.
pub fn flux_divergence(v: &[f64], faces: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len();
    let inv = 1.0 / (dx * dx);
    let mut left = 0.0;
    for i in 0..n {
        let right = if i + 1 < n { faces[i] * (v[i + 1] - v[i]) } else { 0.0 };
        out[i] = (right - left) * inv;
        left = right;
    }
}

/// Sum of `values * dx`.
pub fn quadrature(values: &[f64], dx: f64) -> f64 {
    values.iter().sum::<f64>() * dx
}
