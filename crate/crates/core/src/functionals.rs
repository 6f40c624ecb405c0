//! Quadrature, norms, the energy functional `y^(B)`, masses and the diagnostics series.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::gamma::{
    admissible_b, check_al, check_g1, check_g2, decay_constants, DecayConstants, GammaError, GammaModel, G2_DEFAULT_SAMPLES,
    G2_DEFAULT_XI_MAX,
};
use crate::solver::stencil::{laplacian, nodal_gradient};
use crate::solver::{Grid, SimulationConfig, State};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error("cannot integrate an empty vector")]
    Empty,
    #[error("B > 0 required (got {0})")]
    InvalidWeight(f64),
    #[error(transparent)]
    Gamma(#[from] GammaError),
}

/// Midpoint rule on the cell-centred grid.
pub fn integrate(values: &[f64], dx: f64) -> Result<f64, FunctionalError> {
    if values.is_empty() {
        return Err(FunctionalError::Empty);
    }
    Ok(values.iter().sum::<f64>() * dx)
}

fn l2(values: &[f64], dx: f64) -> f64 {
    (values.iter().map(|x| x * x).sum::<f64>() * dx).sqrt()
}

fn linf(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareConstant {
    pub lambda1: f64,
}

pub fn poincare_lambda1(length: f64) -> PoincareConstant {
    PoincareConstant {
        lambda1: PI * PI / (length * length),
    }
}

/// `int v_x^2 / (gamma(theta) + D) + B int u_x^2`, using the solver's nodal gradients.
pub fn compute_y(state: &State, grid: &Grid, gamma: &GammaModel, d: f64, b: f64) -> Result<f64, FunctionalError> {
    if !(b > 0.0) {
        return Err(FunctionalError::InvalidWeight(b));
    }
    let n = grid.n_cells();
    let mut gv = vec![0.0; n];
    let mut gu = vec![0.0; n];
    nodal_gradient(&state.v, grid.dx(), &mut gv);
    nodal_gradient(&state.u, grid.dx(), &mut gu);
    Ok(y_from_gradients(&gv, &gu, &state.theta, grid.dx(), gamma, d, b))
}

fn y_from_gradients(gv: &[f64], gu: &[f64], theta: &[f64], dx: f64, gamma: &GammaModel, d: f64, b: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..gv.len() {
        sum += gv[i] * gv[i] / (gamma.value(theta[i]) + d) + b * gu[i] * gu[i];
    }
    sum * dx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Masses {
    pub u: f64,
    pub ut: f64,
    pub theta: f64,
}

/// `(int u, int u_t, int theta)` with `u_t = v - a u`.
pub fn masses(state: &State, a: f64, dx: f64) -> Masses {
    let su: f64 = state.u.iter().sum();
    let sv: f64 = state.v.iter().sum();
    let st: f64 = state.theta.iter().sum();
    Masses {
        u: su * dx,
        ut: (sv - a * su) * dx,
        theta: st * dx,
    }
}

/// `int (v_xx)^2` with the three-point second difference.
pub fn vxx_energy(v: &[f64], dx: f64) -> f64 {
    let mut lap = vec![0.0; v.len()];
    laplacian(v, dx, &mut lap);
    lap.iter().map(|x| x * x).sum::<f64>() * dx
}

/// Running trapezoid-in-time integral of a sampled rate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DissipationTracker {
    last: Option<(f64, f64)>,
    total: f64,
}

impl DissipationTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, rate: f64) -> f64 {
        if let Some((t0, r0)) = self.last {
            self.total += 0.5 * (t - t0) * (rate + r0);
        }
        self.last = Some((t, rate));
        self.total
    }

    pub fn total(&self) -> f64 {
        self.total
    }
}

/// Running dissipation integral for a sampled series of `int v_xx^2`.
pub fn dissipation_tracker(times: &[f64], energies: &[f64]) -> Vec<f64> {
    let mut tracker = DissipationTracker::new();
    times.iter().zip(energies).map(|(&t, &e)| tracker.push(t, e)).collect()
}

/// One row of the diagnostics stream. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub dt: f64,
    pub ux_l2: f64,
    pub ux_linf: f64,
    pub vx_l2: f64,
    pub vx_linf: f64,
    pub theta_linf: f64,
    pub thetax_l2: f64,
    pub mass_u: f64,
    pub mass_ut: f64,
    pub mass_theta: f64,
    #[serde(rename = "y_B")]
    pub y_b: f64,
    pub diss_vxx: f64,
    pub heat_in: f64,
}

impl DiagnosticsRow {
    pub const COLUMNS: [&'static str; 14] = [
        "t",
        "dt",
        "ux_l2",
        "ux_linf",
        "vx_l2",
        "vx_linf",
        "theta_linf",
        "thetax_l2",
        "mass_u",
        "mass_ut",
        "mass_theta",
        "y_B",
        "diss_vxx",
        "heat_in",
    ];

    pub fn values(&self) -> [f64; 14] {
        [
            self.t,
            self.dt,
            self.ux_l2,
            self.ux_linf,
            self.vx_l2,
            self.vx_linf,
            self.theta_linf,
            self.thetax_l2,
            self.mass_u,
            self.mass_ut,
            self.mass_theta,
            self.y_b,
            self.diss_vxx,
            self.heat_in,
        ]
    }

    pub fn from_values(v: [f64; 14]) -> Self {
        Self {
            t: v[0],
            dt: v[1],
            ux_l2: v[2],
            ux_linf: v[3],
            vx_l2: v[4],
            vx_linf: v[5],
            theta_linf: v[6],
            thetax_l2: v[7],
            mass_u: v[8],
            mass_ut: v[9],
            mass_theta: v[10],
            y_b: v[11],
            diss_vxx: v[12],
            heat_in: v[13],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = DiagnosticsRow::COLUMNS.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.values()[k]).collect())
    }
}

/// Everything measured on one state: the CSV quantities plus the auxiliary traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub ux_l2: f64,
    pub ux_linf: f64,
    pub vx_l2: f64,
    pub vx_linf: f64,
    pub theta_linf: f64,
    pub thetax_l2: f64,
    pub masses: Masses,
    pub y_b: f64,
    pub vxx_energy: f64,
    /// `int gamma(theta) (v_x - a u_x)^2`
    pub source_rate: f64,
    /// `max |theta - mean(theta)|`
    pub theta_osc: f64,
    /// `||u_t||_{W^{1,2}} + ||theta||_inf`
    pub w12: f64,
}

pub fn probe(state: &State, config: &SimulationConfig, b: f64) -> Probe {
    let grid = &config.grid;
    let (n, dx, a) = (grid.n_cells(), grid.dx(), config.a);
    let mut gu = vec![0.0; n];
    let mut gv = vec![0.0; n];
    let mut gt = vec![0.0; n];
    nodal_gradient(&state.u, dx, &mut gu);
    nodal_gradient(&state.v, dx, &mut gv);
    nodal_gradient(&state.theta, dx, &mut gt);
    let m = masses(state, a, dx);
    let mean_theta = m.theta / grid.length();
    let mut source = 0.0;
    let mut w = 0.0;
    for i in 0..n {
        let strain = gv[i] - a * gu[i];
        source += config.gamma.value(state.theta[i]) * strain * strain;
        let ut = state.v[i] - a * state.u[i];
        w += ut * ut + strain * strain;
    }
    let theta_linf = linf(&state.theta);
    Probe {
        ux_l2: l2(&gu, dx),
        ux_linf: linf(&gu),
        vx_l2: l2(&gv, dx),
        vx_linf: linf(&gv),
        theta_linf,
        thetax_l2: l2(&gt, dx),
        masses: m,
        y_b: y_from_gradients(&gv, &gu, &state.theta, dx, &config.gamma, config.d, b),
        vxx_energy: vxx_energy(&state.v, dx),
        source_rate: source * dx,
        theta_osc: state.theta.iter().fold(0.0, |acc, t| acc.max((t - mean_theta).abs())),
        w12: (w * dx).sqrt() + theta_linf,
    }
}

/// `||u_t||_{W^{1,2}} + ||theta||_inf` without the other probe quantities.
pub(crate) fn w12_monitor(state: &State, config: &SimulationConfig, gu: &mut [f64], gv: &mut [f64]) -> f64 {
    let dx = config.grid.dx();
    let a = config.a;
    nodal_gradient(&state.u, dx, gu);
    nodal_gradient(&state.v, dx, gv);
    let mut w = 0.0;
    for i in 0..state.u.len() {
        let ut = state.v[i] - a * state.u[i];
        let strain = gv[i] - a * gu[i];
        w += ut * ut + strain * strain;
    }
    (w * dx).sqrt() + linf(&state.theta)
}

/// Weight `B` of the energy functional and whether the decay conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalWeight {
    pub b: f64,
    /// `true` when (g1), (g2) and the strict smallness condition on `a` all hold,
    /// in which case `b` is the midpoint of the admissible interval.
    pub decay_mode: bool,
    pub constants: Option<DecayConstants>,
}

/// Picks `B`: midpoint of the admissible interval in decay mode, the weaker
/// global-existence bound otherwise. An explicit override always wins.
pub fn select_weight(config: &SimulationConfig) -> Result<FunctionalWeight, FunctionalError> {
    let gamma0 = config.gamma.at_zero();
    let lambda1 = poincare_lambda1(config.grid.length()).lambda1;
    let g1 = check_g1(&config.gamma, G2_DEFAULT_XI_MAX, G2_DEFAULT_SAMPLES)?.passed();
    let g2 = check_g2(&config.gamma, config.d, G2_DEFAULT_XI_MAX, G2_DEFAULT_SAMPLES)?.passed();
    let al = check_al(config.a, config.grid.length(), &config.gamma, config.d)?.passed();
    let interval = admissible_b(config.a, config.d, gamma0, lambda1);
    let decay_mode = g1 && g2 && al && interval.is_ok();
    let b = match (config.functional_b, &interval) {
        (Some(b), _) => b,
        (None, Ok(adm)) if decay_mode => adm.b_chosen,
        (None, Ok(adm)) => adm.b_finite_time,
        (None, Err(_)) => {
            let c1 = 2.0 * gamma0 / (gamma0 + config.d);
            c1 * config.a * lambda1 / 2.0
        }
    };
    let constants = if decay_mode {
        Some(decay_constants(config.a, config.d, gamma0, lambda1, b)?)
    } else {
        None
    };
    Ok(FunctionalWeight {
        b,
        decay_mode,
        constants,
    })
}
