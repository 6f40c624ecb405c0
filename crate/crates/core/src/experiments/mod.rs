//! Named experiment presets, their checks and on-disk artifacts.
//!
//! A run writes `runs/<preset>/<hash>/` with `series.csv`, `reports.json` and
//! `config.snapshot`, where `<hash>` is the SHA-256 of the canonical config text.
//! `THERMOVISCO_RUNS_DIR` replaces the `runs` root.

mod convergence;
mod sweep;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{
    check_comparison, check_energy_decay, fit_decay, fit_decay_samples, h_from_series, supersolution, CheckReport, FIT_FLOOR,
};
use crate::cli::config::{canonical_text, config_hash, ConfigError};
use crate::cli::csv::series_to_csv;
use crate::gamma::{
    check_al, check_g1, check_g2, check_growth_integrability, ConditionReport, GammaError, GammaModel, Verdict,
    G2_DEFAULT_SAMPLES, G2_DEFAULT_XI_MAX,
};
use crate::solver::{
    manufactured_initial_data, simulate, BlowUpReason, CosineTarget, Grid, InitialData, Profile, Scheme, SimulationConfig,
    SimulationResult, SolverError, StepStatus,
};

pub use convergence::{convergence_study, ConvergenceLevel, ConvergenceReport, NormOrders};
pub use sweep::{run_sweep, SweepRow, SweepSpec, SweepSummary, SWEEP_DEFAULT_CAP};

pub const RUNS_DIR_ENV: &str = "THERMOVISCO_RUNS_DIR";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset {preset}: expected outcome {expected:?} is inconsistent with the conditions: {reason}")]
    Inconsistent {
        preset: String,
        expected: ExpectedOutcome,
        reason: String,
    },
    #[error("{context}: {source}")]
    Solver { context: String, source: SolverError },
    #[error(transparent)]
    Gamma(#[from] GammaError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl ExperimentError {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| ExperimentError::Io { context, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExpectedOutcome {
    GlobalDecay,
    GlobalBounded,
    BlowUpDetected,
    ConvergenceOrder,
}

/// Quantity whose exponential decay is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    UxLinf,
    VxL2,
    /// `||theta - mean(theta)||_inf`
    ThetaOsc,
}

impl FitTarget {
    pub fn name(&self) -> &'static str {
        match self {
            FitTarget::UxLinf => "ux_linf",
            FitTarget::VxL2 => "vx_l2",
            FitTarget::ThetaOsc => "theta_osc",
        }
    }
}

/// A check evaluated on a finished run, with its thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// `|int u_t - int u0t| <= ut_rel max(1, |int u0t|)` and
    /// `|int u - int u0 - t int u0t| <= u_abs` at every row.
    Conservation {
        ut_rel: f64,
        u_abs: f64,
    },
    /// Trapezoid quadrature of the heat source against the change of `int theta`,
    /// and `int theta` nondecreasing step by step.
    HeatBalance {
        rel_tol: f64,
        step_tol: f64,
    },
    EnergyDecay,
    DecayFit {
        target: FitTarget,
        max_residual: f64,
    },
    /// `||theta(t_end) - mean||_inf <= tol (1 + theta_inf)`
    FlatProfile {
        tol: f64,
    },
    /// `theta_inf |Omega| = int theta0 + int_0^T int source` within `rel_tol`.
    ThetaInfPrediction {
        rel_tol: f64,
    },
    Comparison,
    /// Detector fired before `t_end` after the monitor grew by `min_growth`.
    BlowUp {
        min_growth: f64,
    },
    RunsToEnd,
    ConvergenceOrder {
        levels: usize,
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentPreset {
    pub name: String,
    pub config: SimulationConfig,
    pub checks: Vec<Check>,
    pub expected: ExpectedOutcome,
}

pub const PRESET_NAMES: [&str; 5] = ["theorem9_global", "theorem33_decay", "blowup_demo", "blowup_control", "mms"];

fn saturating() -> GammaModel {
    GammaModel::saturating_exp(1.0, 0.5, 1.0).expect("valid parameters")
}

fn smooth_data() -> InitialData {
    InitialData {
        u0: Profile::CosineBump {
            offset: 0.5,
            amplitude: 2.0,
            mode: 1,
        },
        ut0: Profile::CosineBump {
            offset: 0.25,
            amplitude: 2.0,
            mode: 2,
        },
        theta0: Profile::CosineBump {
            offset: 0.2,
            amplitude: 0.1,
            mode: 1,
        },
    }
}

fn packet_data() -> InitialData {
    InitialData {
        u0: Profile::Packet {
            offset: 0.0,
            amplitude: 2.0,
            center: 0.5,
            width: 0.25,
            wavenumber: 0.0,
        },
        ut0: Profile::Packet {
            offset: 0.0,
            amplitude: 2.0,
            center: 0.5,
            width: 0.25,
            wavenumber: 4.0,
        },
        theta0: Profile::Flat { value: 0.1 },
    }
}

fn decay_checks() -> Vec<Check> {
    vec![
        Check::HeatBalance {
            rel_tol: 1e-4,
            step_tol: 1e-12,
        },
        Check::EnergyDecay,
        Check::DecayFit {
            target: FitTarget::UxLinf,
            max_residual: 0.5,
        },
        Check::DecayFit {
            target: FitTarget::VxL2,
            max_residual: 0.5,
        },
        Check::DecayFit {
            target: FitTarget::ThetaOsc,
            max_residual: 0.5,
        },
        Check::FlatProfile { tol: 1e-4 },
        Check::ThetaInfPrediction { rel_tol: 1e-3 },
        Check::Comparison,
    ]
}

/// Threshold of the smallness condition on `a |Omega|^2` for `gamma` and `D`.
pub fn al_threshold(gamma: &GammaModel, length: f64, d: f64) -> Result<f64, GammaError> {
    Ok(check_al(1.0, length, gamma, d)?.value.expect("threshold is reported"))
}

pub fn preset(name: &str) -> Option<ExperimentPreset> {
    let unit = |n: usize| Grid::new(1.0, n).expect("valid grid");
    let p = match name {
        "theorem9_global" => {
            let mut c = SimulationConfig::new(unit(512), 1.0, 1.0, saturating(), smooth_data(), 40.0);
            c.diagnostics.interval = 0.005;
            ExperimentPreset {
                name: name.into(),
                config: c,
                checks: vec![
                    Check::Conservation {
                        ut_rel: 1e-8,
                        u_abs: 1e-7,
                    },
                    Check::HeatBalance {
                        rel_tol: 1e-4,
                        step_tol: 1e-12,
                    },
                    Check::Comparison,
                    Check::RunsToEnd,
                ],
                expected: ExpectedOutcome::GlobalBounded,
            }
        }
        "theorem33_decay" => {
            let gamma = saturating();
            let a = 0.5 * al_threshold(&gamma, 1.0, 1.0).ok()?;
            let mut c = SimulationConfig::new(unit(512), a, 1.0, gamma, smooth_data(), 40.0);
            c.diagnostics.interval = 0.005;
            ExperimentPreset {
                name: name.into(),
                config: c,
                checks: decay_checks(),
                expected: ExpectedOutcome::GlobalDecay,
            }
        }
        "blowup_demo" | "blowup_control" => {
            let gamma = if name == "blowup_demo" {
                GammaModel::power(1.0, 2.0).expect("valid parameters")
            } else {
                // same gamma(0) = 1, bounded, and compliant at D = 0.1
                GammaModel::saturating_exp(1.05, 0.05, 1.0).expect("valid parameters")
            };
            let mut c = SimulationConfig::new(unit(1024), 1.0, 0.1, gamma, packet_data(), 2.0);
            c.diagnostics.interval = 0.001;
            let (checks, expected) = if name == "blowup_demo" {
                (vec![Check::BlowUp { min_growth: 1e3 }], ExpectedOutcome::BlowUpDetected)
            } else {
                (vec![Check::RunsToEnd], ExpectedOutcome::GlobalBounded)
            };
            ExperimentPreset {
                name: name.into(),
                config: c,
                checks,
                expected,
            }
        }
        "mms" => {
            let grid = unit(128);
            let target = CosineTarget::standard(1.0);
            let initial = manufactured_initial_data(&target, &grid);
            // a = rate would make v* = u*_t + a u* vanish identically
            let mut c = SimulationConfig::new(grid, 0.5, 1.0, saturating(), initial, 0.05);
            c.time.scheme = Scheme::Rk4;
            c.diagnostics.interval = 0.001;
            c.forcing = Some(Arc::new(target));
            ExperimentPreset {
                name: name.into(),
                config: c,
                checks: vec![Check::ConvergenceOrder {
                    levels: 3,
                    min: 1.8,
                    max: 2.2,
                }],
                expected: ExpectedOutcome::ConvergenceOrder,
            }
        }
        _ => return None,
    };
    Some(p)
}

/// Structural condition reports for a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub g1: ConditionReport,
    pub g2: ConditionReport,
    #[serde(rename = "aL")]
    pub al: ConditionReport,
    pub growth: ConditionReport,
}

pub fn condition_summary(config: &SimulationConfig) -> Result<ConditionSummary, GammaError> {
    Ok(ConditionSummary {
        g1: check_g1(&config.gamma, G2_DEFAULT_XI_MAX, G2_DEFAULT_SAMPLES)?,
        g2: check_g2(&config.gamma, config.d, G2_DEFAULT_XI_MAX, G2_DEFAULT_SAMPLES)?,
        al: check_al(config.a, config.grid.length(), &config.gamma, config.d)?,
        growth: check_growth_integrability(&config.gamma, 1e6)?,
    })
}

/// Pre-flight: the expected outcome must be backed by the condition reports.
///
/// Global outcomes need (g1) and (g2) to pass (tabulated (g1) is accepted when
/// sampling found no violation); decay additionally needs the smallness condition
/// on `a`. Blow-up needs integrable `1/gamma`, and convergence studies need forcing.
pub fn preflight(preset: &ExperimentPreset) -> Result<ConditionSummary, ExperimentError> {
    let s = condition_summary(&preset.config)?;
    let fail = |reason: String| ExperimentError::Inconsistent {
        preset: preset.name.clone(),
        expected: preset.expected,
        reason,
    };
    let g1_ok = s.g1.verdict != Verdict::Fail;
    match preset.expected {
        ExpectedOutcome::GlobalBounded | ExpectedOutcome::GlobalDecay => {
            if !g1_ok {
                return Err(fail("(g1) fails".into()));
            }
            if !s.g2.passed() {
                return Err(fail(format!("(g2) is {:?}", s.g2.verdict)));
            }
            if preset.expected == ExpectedOutcome::GlobalDecay && !s.al.passed() {
                return Err(fail("smallness condition on a fails".into()));
            }
        }
        ExpectedOutcome::BlowUpDetected => {
            if !s.growth.passed() {
                return Err(fail("1/gamma is not integrable".into()));
            }
        }
        ExpectedOutcome::ConvergenceOrder => {
            if preset.config.forcing.is_none() {
                return Err(fail("no manufactured forcing configured".into()));
            }
        }
    }
    for check in &preset.checks {
        let ok = match check {
            Check::EnergyDecay | Check::DecayFit { .. } | Check::FlatProfile { .. } | Check::ThetaInfPrediction { .. } => {
                preset.expected == ExpectedOutcome::GlobalDecay
            }
            Check::ConvergenceOrder { levels, .. } => preset.config.forcing.is_some() && *levels >= 3,
            _ => true,
        };
        if !ok {
            return Err(fail(format!("check {check:?} does not apply")));
        }
    }
    Ok(s)
}

/// Everything produced by one preset run, before it is written to disk.
#[derive(Debug, Clone)]
pub struct PresetRun {
    pub preset: String,
    pub expected: ExpectedOutcome,
    pub conditions: ConditionSummary,
    pub result: SimulationResult,
    pub reports: Vec<CheckReport>,
    pub convergence: Option<ConvergenceReport>,
}

impl PresetRun {
    /// All checks pass.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn blew_up(&self) -> bool {
        self.result.blew_up()
    }
}

#[derive(Serialize)]
struct ReportsFile<'a> {
    preset: &'a str,
    expected: ExpectedOutcome,
    outcome: &'a crate::solver::StepOutcome,
    t_final: f64,
    passed: bool,
    weight: &'a crate::functionals::FunctionalWeight,
    conditions: &'a ConditionSummary,
    checks: &'a [CheckReport],
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: &'a Option<ConvergenceReport>,
    accepted_steps: usize,
    rejected_steps: usize,
}

impl PresetRun {
    pub fn reports_json(&self) -> String {
        let file = ReportsFile {
            preset: &self.preset,
            expected: self.expected,
            outcome: &self.result.outcome,
            t_final: self.result.final_state.t,
            passed: self.passed(),
            weight: &self.result.weight,
            conditions: &self.conditions,
            checks: &self.reports,
            convergence: &self.convergence,
            accepted_steps: self.result.trace.accepted_steps,
            rejected_steps: self.result.trace.rejected_steps,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Runs the simulation and evaluates every check; no files are written.
pub fn execute_preset(preset: &ExperimentPreset) -> Result<PresetRun, ExperimentError> {
    let conditions = preflight(preset)?;
    let result = simulate(&preset.config).map_err(|source| ExperimentError::Solver {
        context: format!("preset {}", preset.name),
        source,
    })?;
    let mut reports = Vec::new();
    let mut convergence = None;
    for check in &preset.checks {
        let report = match *check {
            Check::ConvergenceOrder { levels, min, max } => {
                let study = convergence_study(&preset.config, levels)?;
                let r = study.to_report(min, max);
                convergence = Some(study);
                r
            }
            _ => evaluate(check, &preset.config, &result),
        };
        reports.push(report);
    }
    Ok(PresetRun {
        preset: preset.name.clone(),
        expected: preset.expected,
        conditions,
        result,
        reports,
        convergence,
    })
}

/// Trapezoid rule over the recorded rows of the heat-source rate.
pub fn heat_quadrature(result: &SimulationResult) -> f64 {
    let rows = &result.series.rows;
    let q = &result.trace.source_rate;
    (1..rows.len())
        .map(|k| 0.5 * (rows[k].t - rows[k - 1].t) * (q[k] + q[k - 1]))
        .sum()
}

/// Growth of the monitor that stopped a blown-up run, relative to its initial value.
pub fn monitor_growth(result: &SimulationResult) -> Option<f64> {
    let StepStatus::BlownUp { reason, value } = result.outcome.status else {
        return None;
    };
    let first = result.series.rows.first()?;
    let growth = match reason {
        BlowUpReason::ThetaCap => value / first.theta_linf,
        BlowUpReason::W12Cap => value / result.trace.w12[0],
        BlowUpReason::DtUnderflow | BlowUpReason::NonFinite => {
            let last = result.trace.w12.iter().copied().fold(0.0, f64::max);
            last / result.trace.w12[0]
        }
    };
    Some(growth)
}

fn evaluate(check: &Check, config: &SimulationConfig, result: &SimulationResult) -> CheckReport {
    let rows = &result.series.rows;
    let first = rows[0];
    let last = rows[rows.len() - 1];
    let length = config.grid.length();
    match *check {
        Check::Conservation { ut_rel, u_abs } => {
            let scale = first.mass_ut.abs().max(1.0);
            let ut_err = rows.iter().map(|r| (r.mass_ut - first.mass_ut).abs()).fold(0.0, f64::max);
            let u_err = rows
                .iter()
                .map(|r| (r.mass_u - first.mass_u - r.t * first.mass_ut).abs())
                .fold(0.0, f64::max);
            CheckReport::new("conservation", ut_err <= ut_rel * scale && u_err <= u_abs)
                .metric("mass_ut_error", ut_err)
                .metric("mass_u_error", u_err)
        }
        Check::HeatBalance { rel_tol, step_tol } => {
            let gained = last.mass_theta - first.mass_theta;
            let quad = heat_quadrature(result);
            let rel = (quad - gained).abs() / gained.abs().max(f64::MIN_POSITIVE);
            let drop_tol = step_tol * last.mass_theta.abs().max(1.0);
            let drop = result.trace.max_heat_mass_drop;
            CheckReport::new("heat_balance", rel <= rel_tol && drop <= drop_tol)
                .metric("relative_error", rel)
                .metric(
                    "stepper_relative_error",
                    (last.heat_in - gained).abs() / gained.abs().max(f64::MIN_POSITIVE),
                )
                .metric("max_step_drop", drop)
        }
        Check::EnergyDecay => match check_energy_decay(&result.series, &result.weight) {
            Ok(r) => r.to_report(),
            Err(e) => CheckReport::errored("energy_decay", e),
        },
        Check::DecayFit { target, max_residual } => {
            let fit = match target {
                FitTarget::ThetaOsc => {
                    fit_decay_samples(&result.series.times(), &result.trace.theta_osc, FIT_FLOOR, target.name())
                }
                _ => fit_decay(&result.series, target.name(), FIT_FLOOR),
            };
            match fit {
                Ok(f) => f.to_report(max_residual),
                Err(e) => CheckReport::errored(&format!("decay_fit_{}", target.name()), e),
            }
        }
        Check::FlatProfile { tol } => {
            let theta_inf = last.mass_theta / length;
            let osc = *result.trace.theta_osc.last().expect("rows are recorded");
            CheckReport::new("flat_profile", osc <= tol * (1.0 + theta_inf))
                .metric("theta_osc", osc)
                .metric("theta_inf", theta_inf)
        }
        Check::ThetaInfPrediction { rel_tol } => {
            let measured = last.mass_theta;
            let predicted = first.mass_theta + heat_quadrature(result);
            let rel = (measured - predicted).abs() / measured.abs().max(f64::MIN_POSITIVE);
            CheckReport::new("theta_inf_prediction", rel <= rel_tol)
                .metric("theta_inf", measured / length)
                .metric("predicted", predicted / length)
                .metric("relative_error", rel)
        }
        Check::Comparison => {
            let h = h_from_series(&result.series, config.a);
            let outcome = supersolution(&result.series.times(), &h, first.theta_linf, &config.gamma)
                .and_then(|curve| check_comparison(&result.series, &curve));
            match outcome {
                Ok(r) => r.to_report(),
                Err(e) => CheckReport::errored("comparison", e),
            }
        }
        Check::BlowUp { min_growth } => {
            let growth = monitor_growth(result).unwrap_or(0.0);
            let before_end = result.final_state.t < config.time.t_end;
            CheckReport::new("blow_up", result.blew_up() && before_end && growth >= min_growth)
                .metric("t_detect", result.final_state.t)
                .metric("growth", growth)
        }
        Check::RunsToEnd => CheckReport::new(
            "runs_to_end",
            matches!(result.outcome.status, StepStatus::Finished) && result.final_state.t == config.time.t_end,
        )
        .metric("t_final", result.final_state.t)
        .metric("max_theta", rows.iter().map(|r| r.theta_linf).fold(0.0, f64::max)),
        Check::ConvergenceOrder { .. } => unreachable!("handled by execute_preset"),
    }
}

pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// `<root>/<preset>/<hash>` for a configuration.
pub fn artifact_dir(root: &Path, preset: &str, config: &SimulationConfig) -> PathBuf {
    root.join(preset).join(config_hash(config))
}

/// Writes `series.csv`, `reports.json` and `config.snapshot`; returns the directory.
pub fn write_artifacts(run: &PresetRun, config: &SimulationConfig, root: &Path) -> Result<PathBuf, ExperimentError> {
    let dir = artifact_dir(root, &run.preset, config);
    std::fs::create_dir_all(&dir).map_err(ExperimentError::io(dir.display().to_string()))?;
    let files = [
        ("series.csv", series_to_csv(&run.result.series)),
        ("reports.json", run.reports_json()),
        ("config.snapshot", canonical_text(config)),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(ExperimentError::io(path.display().to_string()))?;
    }
    Ok(dir)
}

/// Looks up the preset, runs it, and writes its artifacts under `root`.
pub fn run_preset(name: &str, root: &Path) -> Result<(PresetRun, PathBuf), ExperimentError> {
    let p = preset(name).ok_or_else(|| ExperimentError::UnknownPreset(name.into()))?;
    run_preset_with(&p, root)
}

pub fn run_preset_with(preset: &ExperimentPreset, root: &Path) -> Result<(PresetRun, PathBuf), ExperimentError> {
    let run = execute_preset(preset)?;
    let dir = write_artifacts(&run, &preset.config, root)?;
    Ok((run, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_passes_preflight() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            assert_eq!(p.name, name);
            p.config.validate().unwrap();
            preflight(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn inconsistent_expectation_is_rejected() {
        let mut p = preset("blowup_demo").unwrap();
        p.expected = ExpectedOutcome::GlobalBounded;
        assert!(matches!(preflight(&p), Err(ExperimentError::Inconsistent { .. })));
        let mut p = preset("theorem9_global").unwrap();
        p.config.a = 10.0;
        p.expected = ExpectedOutcome::GlobalDecay;
        assert!(preflight(&p).is_err());
        let mut p = preset("theorem9_global").unwrap();
        p.checks.push(Check::EnergyDecay);
        assert!(preflight(&p).is_err());
    }

    #[test]
    fn decay_preset_sits_at_half_threshold() {
        let p = preset("theorem33_decay").unwrap();
        let thr = al_threshold(&p.config.gamma, 1.0, 1.0).unwrap();
        assert!((p.config.a - 0.5 * thr).abs() < 1e-15);
    }

    #[test]
    fn short_run_writes_artifacts() {
        let mut p = preset("theorem9_global").unwrap();
        p.config = SimulationConfig {
            grid: Grid::new(1.0, 32).unwrap(),
            ..p.config
        };
        p.config.time.t_end = 0.05;
        p.config.diagnostics.interval = 0.0005;
        p.config.monitors.dt_min = 1e-14;
        let dir = tempfile::tempdir().unwrap();
        let (run, out) = run_preset_with(&p, dir.path()).unwrap();
        assert!(run.passed(), "{:?}", run.reports);
        assert_eq!(run.result.series.len(), 101);
        for f in ["series.csv", "reports.json", "config.snapshot"] {
            assert!(out.join(f).is_file());
        }
        assert!(out.starts_with(dir.path().join("theorem9_global")));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("reports.json")).unwrap()).unwrap();
        assert_eq!(json["checks"].as_array().unwrap().len(), 4);
        assert_eq!(json["conditions"]["aL"]["verdict"], "pass");
    }
}
