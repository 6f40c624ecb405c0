use serde::Serialize;

use super::{AnalysisError, CheckReport};
use crate::functionals::DiagnosticsSeries;
use crate::gamma::GammaModel;

/// Values beyond this are reported as divergence of the supersolution.
const Z_DIVERGED: f64 = 1e15;
/// Largest relative change of `z` in one RK4 substep.
const MAX_RELATIVE_GROWTH: f64 = 0.01;

/// Solution of `z' = h(t) gamma(z)`, `z(0) = xi_star`, sampled at the input times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersolutionCurve {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// First time at which `z` exceeded the divergence threshold, if any.
    pub diverged_at: Option<f64>,
}

/// `h(t) = 2 ||v_x||_inf^2 + 2 a^2 ||u_x||_inf^2` from a series.
pub fn h_from_series(series: &DiagnosticsSeries, a: f64) -> Vec<f64> {
    series
        .rows
        .iter()
        .map(|r| 2.0 * r.vx_linf * r.vx_linf + 2.0 * a * a * r.ux_linf * r.ux_linf)
        .collect()
}

/// RK4 on the sample grid with `h` linear between samples; substeps keep the
/// relative change of `z` per substep small so steep growth is resolved.
pub fn supersolution(times: &[f64], h: &[f64], xi_star: f64, gamma: &GammaModel) -> Result<SupersolutionCurve, AnalysisError> {
    if times.len() != h.len() || times.is_empty() {
        return Err(AnalysisError::MismatchedGrids(format!(
            "{} times for {} h samples",
            times.len(),
            h.len()
        )));
    }
    if let Some(i) = h.iter().position(|v| !(*v >= 0.0)) {
        return Err(AnalysisError::NegativeH { index: i, value: h[i] });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalysisError::MismatchedGrids("times must be strictly increasing".into()));
    }
    if !(xi_star >= 0.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "xi_star >= 0 required (got {xi_star})"
        )));
    }
    let rhs = |z: f64, hv: f64| hv * gamma.value(z);
    let mut z = xi_star;
    let mut out = vec![z];
    let mut diverged_at = None;
    for k in 0..times.len() - 1 {
        if diverged_at.is_some() {
            out.push(f64::INFINITY);
            continue;
        }
        let (t0, t1) = (times[k], times[k + 1]);
        let (h0, h1) = (h[k], h[k + 1]);
        let hat = |t: f64| h0 + (h1 - h0) * (t - t0) / (t1 - t0);
        let mut t = t0;
        while t < t1 {
            let rate = rhs(z, h0.max(h1));
            let mut dt = t1 - t;
            if rate > 0.0 {
                dt = dt.min(MAX_RELATIVE_GROWTH * (1.0 + z) / rate);
            }
            let last = dt >= t1 - t;
            let k1 = rhs(z, hat(t));
            let k2 = rhs(z + 0.5 * dt * k1, hat(t + 0.5 * dt));
            let k3 = rhs(z + 0.5 * dt * k2, hat(t + 0.5 * dt));
            let k4 = rhs(z + dt * k3, hat(t + dt));
            z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t = if last { t1 } else { t + dt };
            if !(z < Z_DIVERGED) {
                diverged_at = Some(t);
                break;
            }
        }
        out.push(if diverged_at.is_some() { f64::INFINITY } else { z });
    }
    Ok(SupersolutionCurve {
        times: times.to_vec(),
        z: out,
        diverged_at,
    })
}

/// Relative slack of the comparison check.
pub const COMPARISON_REL_TOL: f64 = 1e-3;
pub const COMPARISON_ABS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub holds: bool,
    pub violations: usize,
    /// Largest `max theta / z` over the snapshots.
    pub worst_ratio: f64,
    pub first_violation: Option<f64>,
}

impl ComparisonReport {
    pub fn to_report(&self) -> CheckReport {
        CheckReport::new("comparison", self.holds)
            .metric("violations", self.violations as f64)
            .metric("worst_ratio", self.worst_ratio)
    }
}

/// `max_x theta(x, t) <= z(t) (1 + 1e-3) + 1e-9` at every snapshot, reading
/// `max theta` from the series' `theta_linf` column.
pub fn check_comparison(series: &DiagnosticsSeries, curve: &SupersolutionCurve) -> Result<ComparisonReport, AnalysisError> {
    if series.len() != curve.times.len() {
        return Err(AnalysisError::MismatchedGrids(format!(
            "{} snapshots for {} curve samples",
            series.len(),
            curve.times.len()
        )));
    }
    let mut report = ComparisonReport {
        holds: true,
        violations: 0,
        worst_ratio: 0.0,
        first_violation: None,
    };
    for (row, (&t, &z)) in series.rows.iter().zip(curve.times.iter().zip(&curve.z)) {
        if (row.t - t).abs() > 1e-12 * (1.0 + t.abs()) {
            return Err(AnalysisError::MismatchedGrids(format!(
                "snapshot at t = {} vs curve at t = {t}",
                row.t
            )));
        }
        if z > 0.0 {
            report.worst_ratio = report.worst_ratio.max(row.theta_linf / z);
        }
        if row.theta_linf > z * (1.0 + COMPARISON_REL_TOL) + COMPARISON_ABS_TOL {
            report.holds = false;
            report.violations += 1;
            report.first_violation.get_or_insert(t);
        }
    }
    Ok(report)
}
