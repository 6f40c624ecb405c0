//! Method-of-lines solver for the transformed system
//!
//! ```text
//! v_t     = (gamma(theta) v_x)_x + a v - a^2 u
//! u_t     = v - a u
//! theta_t = D theta_xx + gamma(theta) (v_x - a u_x)^2
//! ```
//!
//! on a cell-centred grid with zero-flux faces, which imposes the Neumann
//! conditions on `u`, `v` and `theta`.

mod initial;
mod integrate;
mod mms;
mod operator;
pub mod stencil;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::gamma::{GammaError, GammaModel};

pub use initial::{InitialData, Profile};
pub use integrate::{simulate, simulate_with, stable_dt, step, step_size, Integrator, SimulationResult, Trace};
pub use mms::{manufactured_forcing, manufactured_initial_data, CosineTarget, FlatTarget, Forcing, ManufacturedSolution};
pub use operator::{discrete_rhs, Rhs};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite {field} value at cell {index}")]
    NonFinite { field: &'static str, index: usize },
    #[error("state does not match the grid ({0} cells expected)")]
    ShapeMismatch(usize),
    #[error("manufactured target rejected: {0}")]
    Manufactured(String),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

/// Uniform cell-centred grid on `(0, length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    length: f64,
    n_cells: usize,
}

impl Grid {
    pub const MIN_CELLS: usize = 8;

    pub fn new(length: f64, n_cells: usize) -> Result<Self, SolverError> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("grid.length > 0 required (got {length})")));
        }
        if n_cells < Self::MIN_CELLS {
            return Err(SolverError::InvalidConfig(format!(
                "grid.n_cells >= {} required (got {n_cells})",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { length, n_cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_cells as f64
    }

    /// Cell centre `(i + 1/2) dx`.
    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.x(i)).collect()
    }

    pub fn refined(&self, factor: usize) -> Self {
        Self {
            length: self.length,
            n_cells: self.n_cells * factor,
        }
    }
}

/// Grid samples of `(u, v, theta)` at time `t`, with `v = u_t + a u`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl State {
    pub fn check(&self, grid: &Grid) -> Result<(), SolverError> {
        let n = grid.n_cells();
        if self.u.len() != n || self.v.len() != n || self.theta.len() != n {
            return Err(SolverError::ShapeMismatch(n));
        }
        for (field, values) in [("u", &self.u), ("v", &self.v), ("theta", &self.theta)] {
            if let Some(index) = values.iter().position(|x| !x.is_finite()) {
                return Err(SolverError::NonFinite { field, index });
            }
        }
        Ok(())
    }

    /// `u_t = v - a u`, cell by cell.
    pub fn velocity(&self, a: f64) -> Vec<f64> {
        self.v.iter().zip(&self.u).map(|(v, u)| v - a * u).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical four-stage Runge-Kutta with the parabolic step restriction.
    Rk4,
    /// Two-stage L-stable implicit-explicit Runge-Kutta: both diffusion operators
    /// implicit, reaction and heat source explicit.
    Imex,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::Imex => "imex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeControl {
    pub t_end: f64,
    /// Safety factor applied to the parabolic step bound (`rk4`).
    pub safety: f64,
    pub scheme: Scheme,
    /// Upper bound on the step (`imex`).
    pub dt_max: f64,
    /// Largest relative temperature growth allowed in one step (`imex`).
    pub max_growth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUpThresholds {
    pub theta_cap: f64,
    pub w12_cap: f64,
    pub dt_min: f64,
}

impl BlowUpThresholds {
    pub fn defaults_for(t_end: f64) -> Self {
        Self {
            theta_cap: 1e6,
            w12_cap: 1e6,
            dt_min: 1e-12 * t_end,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsControl {
    /// Time between recorded rows; steps are shortened to land on these instants.
    pub interval: f64,
    /// Keep a full state snapshot every `snapshot_stride` recorded rows; 0 keeps none.
    pub snapshot_stride: usize,
}

#[derive(Clone)]
pub struct SimulationConfig {
    pub grid: Grid,
    pub a: f64,
    pub d: f64,
    pub gamma: GammaModel,
    pub initial: InitialData,
    pub time: TimeControl,
    pub monitors: BlowUpThresholds,
    pub diagnostics: DiagnosticsControl,
    /// Weight of the energy functional; `None` picks it from the decay analysis.
    pub functional_b: Option<f64>,
    pub forcing: Option<Arc<dyn ManufacturedSolution>>,
}

impl fmt::Debug for SimulationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimulationConfig")
            .field("grid", &self.grid)
            .field("a", &self.a)
            .field("d", &self.d)
            .field("gamma", &self.gamma)
            .field("initial", &self.initial)
            .field("time", &self.time)
            .field("monitors", &self.monitors)
            .field("diagnostics", &self.diagnostics)
            .field("functional_b", &self.functional_b)
            .field("forcing", &self.forcing.as_ref().map(|m| m.name()))
            .finish()
    }
}

impl SimulationConfig {
    /// Config with documented defaults for everything except the model and grid.
    pub fn new(grid: Grid, a: f64, d: f64, gamma: GammaModel, initial: InitialData, t_end: f64) -> Self {
        Self {
            grid,
            a,
            d,
            gamma,
            initial,
            time: TimeControl {
                t_end,
                safety: 0.9,
                scheme: Scheme::Imex,
                dt_max: 1e-3,
                max_growth: 0.05,
            },
            monitors: BlowUpThresholds::defaults_for(t_end),
            diagnostics: DiagnosticsControl {
                interval: (t_end / 1000.0).max(1e-6),
                snapshot_stride: 0,
            },
            functional_b: None,
            forcing: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        for (name, v) in [("a", self.a), ("D", self.d)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} > 0 required (got {v})"));
            }
        }
        self.gamma.validate()?;
        let t = &self.time;
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return bad(format!("time.t_end > 0 required (got {})", t.t_end));
        }
        if !(t.safety > 0.0 && t.safety <= 1.0) {
            return bad(format!("time.safety in (0, 1] required (got {})", t.safety));
        }
        if !(t.dt_max > 0.0) {
            return bad(format!("time.dt_max > 0 required (got {})", t.dt_max));
        }
        if !(t.max_growth > 0.0) {
            return bad(format!("time.max_growth > 0 required (got {})", t.max_growth));
        }
        let m = &self.monitors;
        for (name, v) in [
            ("monitor.theta_cap", m.theta_cap),
            ("monitor.w12_cap", m.w12_cap),
            ("monitor.dt_min", m.dt_min),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} > 0 required (got {v})"));
            }
        }
        if !(self.diagnostics.interval > 0.0 && self.diagnostics.interval.is_finite()) {
            return bad(format!(
                "diagnostics.interval > 0 required (got {})",
                self.diagnostics.interval
            ));
        }
        if let Some(b) = self.functional_b {
            if !(b > 0.0 && b.is_finite()) {
                return bad(format!("functional.B > 0 required (got {b})"));
            }
        }
        self.initial.validate(&self.grid)?;
        if let Some(target) = &self.forcing {
            mms::check_compatible(target.as_ref(), &self.grid)?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<State, SolverError> {
        self.initial.build(&self.grid, self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpReason {
    ThetaCap,
    W12Cap,
    DtUnderflow,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Accepted,
    Finished,
    /// `value` is the monitor reading (or step size for underflow) that tripped the guard.
    BlownUp {
        reason: BlowUpReason,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepOutcome {
    #[serde(flatten)]
    pub status: StepStatus,
    pub dt_used: f64,
}

impl StepOutcome {
    pub fn blew_up(&self) -> bool {
        matches!(self.status, StepStatus::BlownUp { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout_is_cell_centred() {
        let g = Grid::new(2.0, 8).unwrap();
        assert_eq!(g.dx(), 0.25);
        assert_eq!(g.x(0), 0.125);
        assert_eq!(g.x(7), 1.875);
        assert!(Grid::new(1.0, 7).is_err());
        assert!(Grid::new(0.0, 16).is_err());
    }

    #[test]
    fn state_check_catches_non_finite() {
        let g = Grid::new(1.0, 8).unwrap();
        let mut s = State {
            t: 0.0,
            u: vec![0.0; 8],
            v: vec![0.0; 8],
            theta: vec![0.0; 8],
        };
        assert!(s.check(&g).is_ok());
        s.v[3] = f64::NAN;
        assert_eq!(s.check(&g), Err(SolverError::NonFinite { field: "v", index: 3 }));
        s.v.pop();
        assert_eq!(s.check(&g), Err(SolverError::ShapeMismatch(8)));
    }
}
