//! Checks of the decay, comparison and interpolation inequalities along simulated runs.

mod comparison;
mod interpolation;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::functionals::{DiagnosticsSeries, FunctionalWeight};

pub use comparison::{check_comparison, h_from_series, supersolution, ComparisonReport, SupersolutionCurve};
pub use interpolation::{gn_bound, gn_bound_with, holder_seminorm, GnBound, GN_MAX_CELLS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("run is not in decay mode: (g1), (g2) and the smallness condition on a must all hold")]
    NotDecayMode,
    #[error("only {found} samples above the floor in the fit window ({needed} needed)")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("h must be nonnegative (h = {value} at sample {index})")]
    NegativeH { index: usize, value: f64 },
    #[error("time grids do not match: {0}")]
    MismatchedGrids(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Generic JSON report: `{check, pass, metrics, window}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, f64>,
    pub window: Option<(f64, f64)>,
    /// Why the check could not be evaluated, when it could not.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckReport {
    pub fn new(check: &str, pass: bool) -> Self {
        Self {
            check: check.to_string(),
            pass,
            metrics: BTreeMap::new(),
            window: None,
            error: None,
        }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    /// Failed report carrying the reason the check could not run.
    pub fn errored(check: &str, error: impl std::fmt::Display) -> Self {
        let mut r = Self::new(check, false);
        r.error = Some(error.to_string());
        r
    }

    pub fn with_window(mut self, window: (f64, f64)) -> Self {
        self.window = Some(window);
        self
    }
}

/// Relative uptick tolerated between consecutive rows.
pub const DECAY_UPTICK: f64 = 1e-6;
/// Below `y(0) * DECAY_NOISE_FLOOR` the functional is at roundoff level and upticks are ignored.
pub const DECAY_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDecayReport {
    pub monotone: bool,
    /// Largest `y(t_{k+1}) / y(t_k) - 1` over pairs above the noise floor.
    pub max_uptick: f64,
    /// `y(t) <= y(0) exp(-c3 t / 2)` throughout the tail window.
    pub tail_bound: bool,
    /// Largest `y(t) / (y(0) exp(-c3 t / 2))` in the tail window.
    pub worst_tail_ratio: f64,
    pub c3: f64,
    pub b: f64,
    pub window: (f64, f64),
}

impl EnergyDecayReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.tail_bound
    }

    pub fn to_report(&self) -> CheckReport {
        CheckReport::new("energy_decay", self.passed())
            .metric("max_uptick", self.max_uptick)
            .metric("worst_tail_ratio", self.worst_tail_ratio)
            .metric("c3", self.c3)
            .metric("B", self.b)
            .with_window(self.window)
    }
}

/// Monotonicity of `y^(B)` and its exponential envelope over the last half of the run.
pub fn check_energy_decay(series: &DiagnosticsSeries, weight: &FunctionalWeight) -> Result<EnergyDecayReport, AnalysisError> {
    let constants = match (weight.decay_mode, &weight.constants) {
        (true, Some(c)) => c,
        _ => return Err(AnalysisError::NotDecayMode),
    };
    let rows = &series.rows;
    if rows.len() < 2 {
        return Err(AnalysisError::InsufficientSamples {
            found: rows.len(),
            needed: 2,
        });
    }
    let y0 = rows[0].y_b;
    let floor = y0 * DECAY_NOISE_FLOOR;
    let mut max_uptick = f64::NEG_INFINITY;
    for pair in rows.windows(2) {
        let (prev, next) = (pair[0].y_b, pair[1].y_b);
        if next <= floor || prev <= 0.0 {
            continue;
        }
        max_uptick = max_uptick.max(next / prev - 1.0);
    }
    if max_uptick == f64::NEG_INFINITY {
        max_uptick = 0.0;
    }
    let t_end = rows[rows.len() - 1].t;
    let t_lo = 0.5 * t_end;
    let c3 = constants.c3;
    let mut worst = 0.0f64;
    let mut tail_bound = true;
    for r in rows.iter().filter(|r| r.t >= t_lo) {
        let bound = y0 * (-0.5 * c3 * r.t).exp();
        if r.y_b > bound {
            tail_bound = false;
        }
        if bound > 0.0 {
            worst = worst.max(r.y_b / bound);
        }
    }
    Ok(EnergyDecayReport {
        monotone: max_uptick <= DECAY_UPTICK,
        max_uptick,
        tail_bound,
        worst_tail_ratio: worst,
        c3,
        b: weight.b,
        window: (t_lo, t_end),
    })
}

/// Default absolute floor below which samples are excluded from decay fits.
pub const FIT_FLOOR: f64 = 1e-12;
/// Samples below this fraction of the largest value are at roundoff level and end the fit window.
pub const FIT_RELATIVE_FLOOR: f64 = 1e-8;
pub const FIT_MIN_SAMPLES: usize = 20;

/// `value ~ C exp(-beta t)` fitted in log space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub beta: f64,
    pub c: f64,
    pub window: (f64, f64),
    /// Largest absolute log residual in the window.
    pub residual: f64,
    pub quantity: String,
    pub samples: usize,
}

impl DecayFit {
    pub fn to_report(&self, max_residual: f64) -> CheckReport {
        CheckReport::new(
            &format!("fit_decay:{}", self.quantity),
            self.beta > 0.0 && self.residual <= max_residual,
        )
        .metric("beta", self.beta)
        .metric("C", self.c)
        .metric("residual", self.residual)
        .metric("samples", self.samples as f64)
        .with_window(self.window)
    }
}

/// Least-squares line through `(t, ln value)`.
///
/// The usable range runs from the start to the first sample at or below
/// `max(floor, FIT_RELATIVE_FLOOR * max value)`; the fit uses its last half.
pub fn fit_decay_samples(times: &[f64], values: &[f64], floor: f64, quantity: &str) -> Result<DecayFit, AnalysisError> {
    if times.len() != values.len() {
        return Err(AnalysisError::MismatchedGrids(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if !(floor > 0.0) {
        return Err(AnalysisError::InvalidArgument(format!("floor > 0 required (got {floor})")));
    }
    let peak = values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let cutoff = floor.max(FIT_RELATIVE_FLOOR * peak);
    let usable = values.iter().position(|&v| !(v > cutoff)).unwrap_or(values.len());
    let window: Vec<usize> = (usable / 2..usable).collect();
    if window.len() < FIT_MIN_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            found: window.len(),
            needed: FIT_MIN_SAMPLES,
        });
    }
    let m = window.len() as f64;
    let t_mean = window.iter().map(|&i| times[i]).sum::<f64>() / m;
    let l_mean = window.iter().map(|&i| values[i].ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &window {
        let dt = times[i] - t_mean;
        sxy += dt * (values[i].ln() - l_mean);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(AnalysisError::InvalidArgument("fit window has zero time extent".into()));
    }
    let slope = sxy / sxx;
    let intercept = l_mean - slope * t_mean;
    let residual = window
        .iter()
        .map(|&i| (values[i].ln() - (intercept + slope * times[i])).abs())
        .fold(0.0, f64::max);
    Ok(DecayFit {
        beta: -slope,
        c: intercept.exp(),
        window: (times[window[0]], times[window[window.len() - 1]]),
        residual,
        quantity: quantity.to_string(),
        samples: window.len(),
    })
}

/// [`fit_decay_samples`] on a named series column.
pub fn fit_decay(series: &DiagnosticsSeries, column: &str, floor: f64) -> Result<DecayFit, AnalysisError> {
    let values = series
        .column(column)
        .ok_or_else(|| AnalysisError::UnknownColumn(column.to_string()))?;
    fit_decay_samples(&series.times(), &values, floor, column)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::DiagnosticsRow;
    use crate::gamma::decay_constants;

    fn series_from(ts: &[f64], ys: &[f64]) -> DiagnosticsSeries {
        DiagnosticsSeries {
            rows: ts
                .iter()
                .zip(ys)
                .map(|(&t, &y)| {
                    let mut v = [0.0; 14];
                    v[0] = t;
                    v[11] = y;
                    v[3] = y;
                    DiagnosticsRow::from_values(v)
                })
                .collect(),
        }
    }

    fn weight(b: f64) -> FunctionalWeight {
        FunctionalWeight {
            b,
            decay_mode: true,
            constants: Some(decay_constants(1.0, 1.0, 1.0, 9.8696, b).unwrap()),
        }
    }

    #[test]
    fn exact_exponential_fit() {
        let ts: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let fit = fit_decay_samples(&ts, &vs, FIT_FLOOR, "synthetic").unwrap();
        assert!((fit.beta - 2.0).abs() < 1e-6);
        assert!((fit.c / 3.0 - 1.0).abs() < 1e-6);
        assert!(fit.residual < 1e-9);
        // 3 e^{-2t} reaches 1e-8 of its peak at t = ln(1e8) / 2 = 9.21
        assert!(
            (fit.window.0 - 4.6).abs() < 1e-12 && (fit.window.1 - 9.2).abs() < 1e-12,
            "{:?}",
            fit.window
        );
    }

    #[test]
    fn roundoff_tail_is_excluded() {
        let ts: Vec<f64> = (0..400).map(|k| k as f64 * 0.1).collect();
        let vs: Vec<f64> = ts
            .iter()
            .enumerate()
            .map(|(k, t)| (-t).exp().max(1e-11 * (1.0 + 0.5 * ((k * 7) % 5) as f64)))
            .collect();
        let fit = fit_decay_samples(&ts, &vs, FIT_FLOOR, "noisy").unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-9 && fit.residual < 1e-9);
        assert!(fit.window.1 < 18.5);
    }

    #[test]
    fn constant_fit_has_zero_rate() {
        let ts: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let fit = fit_decay_samples(&ts, &vec![0.7; 100], FIT_FLOOR, "c").unwrap();
        assert!(fit.beta.abs() < 1e-12);
    }

    #[test]
    fn too_few_samples_above_floor() {
        let ts: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|t| (-t).exp()).collect();
        assert!(matches!(
            fit_decay_samples(&ts, &vs, 1e-3, "x"),
            Err(AnalysisError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn fit_by_column_name() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| (-0.5 * t).exp()).collect();
        let s = series_from(&ts, &ys);
        assert!((fit_decay(&s, "ux_linf", FIT_FLOOR).unwrap().beta - 0.5).abs() < 1e-9);
        assert!(matches!(
            fit_decay(&s, "nope", FIT_FLOOR),
            Err(AnalysisError::UnknownColumn(_))
        ));
    }

    #[test]
    fn flat_run_is_trivially_monotone() {
        let ts: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let r = check_energy_decay(&series_from(&ts, &[0.0; 10]), &weight(4.0)).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_uptick, 0.0);
    }

    #[test]
    fn uptick_and_envelope_detected() {
        let ts: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        let mut ys: Vec<f64> = ts.iter().map(|t| (-2.0 * t).exp()).collect();
        let w = weight(4.0);
        assert!(check_energy_decay(&series_from(&ts, &ys), &w).unwrap().passed());
        ys[20] = ys[19] * 1.01;
        let r = check_energy_decay(&series_from(&ts, &ys), &w).unwrap();
        assert!(!r.monotone && (r.max_uptick - 0.01).abs() < 1e-12);
        // slower than the guaranteed rate c3 / 2
        let slow: Vec<f64> = ts.iter().map(|t| (-0.01 * t).exp()).collect();
        assert!(!check_energy_decay(&series_from(&ts, &slow), &w).unwrap().tail_bound);
    }

    #[test]
    fn roundoff_upticks_are_ignored() {
        let ts: Vec<f64> = (0..4).map(|k| k as f64).collect();
        let r = check_energy_decay(&series_from(&ts, &[1.0, 1e-3, 1e-20, 2e-20]), &weight(4.0)).unwrap();
        assert!(r.monotone);
    }

    #[test]
    fn requires_decay_mode() {
        let mut w = weight(4.0);
        w.decay_mode = false;
        assert_eq!(
            check_energy_decay(&series_from(&[0.0, 1.0], &[1.0, 0.5]), &w),
            Err(AnalysisError::NotDecayMode)
        );
    }

    #[test]
    fn report_json_shape() {
        let r = CheckReport::new("x", true).metric("m", 1.5).with_window((0.0, 2.0));
        let j = serde_json::to_value(&r).unwrap();
        assert_eq!(j["check"], "x");
        assert_eq!(j["pass"], true);
        assert_eq!(j["metrics"]["m"], 1.5);
        assert_eq!(j["window"][1], 2.0);
    }
}
