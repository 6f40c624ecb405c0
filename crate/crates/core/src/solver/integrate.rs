use serde::Serialize;

use super::operator::{explicit_part, heat_source, mechanical_diffusion, thermal_diffusion, Fields, Workspace};
use super::stencil::face_coefficients;
use super::{BlowUpReason, Scheme, SimulationConfig, SolverError, State, StepOutcome, StepStatus};
use crate::functionals::{probe, select_weight, w12_monitor, DiagnosticsRow, DiagnosticsSeries, FunctionalWeight};
use crate::linalg::solve_tridiagonal;

/// Temperatures below this after a step are rejected rather than clipped.
const THETA_FLOOR: f64 = -1e-12;

/// `1 - 1/sqrt(2)`, diagonal of the implicit tableau.
const SDIRK_G: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Explicit parabolic bound `safety dx^2 / (2 max(max gamma(theta), D))`, clamped to the
/// remaining time and to the next diagnostics instant.
pub fn stable_dt(state: &State, config: &SimulationConfig) -> f64 {
    clamp_to_schedule(parabolic_dt(state, config), state.t, config)
}

/// Step the configured scheme would take from `state`, with the same clamping as [`stable_dt`].
pub fn step_size(state: &State, config: &SimulationConfig) -> f64 {
    let raw = match config.time.scheme {
        Scheme::Rk4 => parabolic_dt(state, config),
        Scheme::Imex => {
            let mut ws = Workspace::new(config.grid.n_cells());
            imex_dt(state, config, &mut ws)
        }
    };
    clamp_to_schedule(raw, state.t, config)
}

fn parabolic_dt(state: &State, config: &SimulationConfig) -> f64 {
    let max_gamma = state.theta.iter().fold(0.0f64, |m, &t| m.max(config.gamma.value(t.max(0.0))));
    let dx = config.grid.dx();
    config.time.safety * dx * dx / (2.0 * max_gamma.max(config.d))
}

/// `min(dt_max, max_growth / max(S / (1 + theta)))`: limits the relative heating per step.
fn imex_dt(state: &State, config: &SimulationConfig, ws: &mut Workspace) -> f64 {
    let f = Fields {
        u: &state.u,
        v: &state.v,
        theta: &state.theta,
    };
    heat_source(config, f, ws);
    let rate = ws
        .source
        .iter()
        .zip(&state.theta)
        .fold(0.0f64, |m, (s, t)| m.max(s / (1.0 + t.max(0.0))));
    let growth = if rate > 0.0 {
        config.time.max_growth / rate
    } else {
        f64::INFINITY
    };
    config.time.dt_max.min(growth)
}

fn next_boundary(t: f64, config: &SimulationConfig) -> f64 {
    let h = config.diagnostics.interval;
    let k = (t / h * (1.0 + 1e-12)).floor() + 1.0;
    (k * h).min(config.time.t_end)
}

fn clamp_to_schedule(dt: f64, t: f64, config: &SimulationConfig) -> f64 {
    dt.min(next_boundary(t, config) - t).min(config.time.t_end - t)
}

/// One step from `state` towards the next diagnostics instant.
pub fn step(state: &State, config: &SimulationConfig) -> Result<(State, StepOutcome), SolverError> {
    let mut integrator = Integrator::new(config)?;
    state.check(&config.grid)?;
    Ok(integrator.step(state, next_boundary(state.t, config)))
}

enum Attempt {
    Done(State),
    NegativeTheta,
    NonFinite,
}

/// Reusable stepping machinery for one configuration.
pub struct Integrator<'a> {
    config: &'a SimulationConfig,
    ws: Workspace,
    k: [[Vec<f64>; 3]; 4],
    stage: [Vec<f64>; 3],
    implicit: [Vec<f64>; 4],
    tri: [Vec<f64>; 4],
    sources: [f64; 4],
    /// Heat added by the last accepted step, with the scheme's own quadrature weights.
    pub last_heat: f64,
    pub rejected: usize,
}

impl<'a> Integrator<'a> {
    pub fn new(config: &'a SimulationConfig) -> Result<Self, SolverError> {
        config.validate()?;
        let n = config.grid.n_cells();
        let z = || vec![0.0; n];
        Ok(Self {
            config,
            ws: Workspace::new(n),
            k: std::array::from_fn(|_| [z(), z(), z()]),
            stage: [z(), z(), z()],
            implicit: [z(), z(), z(), z()],
            tri: [z(), z(), z(), z()],
            sources: [0.0; 4],
            last_heat: 0.0,
            rejected: 0,
        })
    }

    /// Advances towards `t_stop`, shortening the step to land on it exactly.
    /// On a monitor violation the pre-step state is returned.
    pub fn step(&mut self, state: &State, t_stop: f64) -> (State, StepOutcome) {
        let cfg = self.config;
        let remaining = t_stop.min(cfg.time.t_end) - state.t;
        let raw = match cfg.time.scheme {
            Scheme::Rk4 => parabolic_dt(state, cfg),
            Scheme::Imex => imex_dt(state, cfg, &mut self.ws),
        };
        let mut dt = raw;
        loop {
            // also absorb slivers left over by accumulated rounding in t
            let lands = dt >= remaining - 1e-6 * dt;
            if lands {
                dt = remaining;
            }
            if dt < cfg.monitors.dt_min {
                return blown(state, BlowUpReason::DtUnderflow, dt, dt);
            }
            let attempt = match cfg.time.scheme {
                Scheme::Rk4 => self.rk4(state, dt),
                Scheme::Imex => self.imex(state, dt),
            };
            let mut next = match attempt {
                Attempt::Done(s) => s,
                Attempt::NonFinite => return blown(state, BlowUpReason::NonFinite, f64::INFINITY, dt),
                Attempt::NegativeTheta => {
                    self.rejected += 1;
                    dt *= 0.5;
                    continue;
                }
            };
            next.t = if lands { t_stop.min(cfg.time.t_end) } else { state.t + dt };
            let theta_max = next.theta.iter().fold(0.0f64, |m, &t| m.max(t));
            if theta_max > cfg.monitors.theta_cap {
                return blown(state, BlowUpReason::ThetaCap, theta_max, dt);
            }
            let (gu, gv) = (&mut self.ws.grad_u, &mut self.ws.grad_v);
            let w12 = w12_monitor(&next, cfg, gu, gv);
            if w12 > cfg.monitors.w12_cap {
                return blown(state, BlowUpReason::W12Cap, w12, dt);
            }
            let status = if next.t >= cfg.time.t_end {
                StepStatus::Finished
            } else {
                StepStatus::Accepted
            };
            return (next, StepOutcome { status, dt_used: dt });
        }
    }

    fn finish(&mut self, mut next: State) -> Attempt {
        let fields = [&next.u, &next.v, &next.theta];
        if fields.iter().any(|f| f.iter().any(|x| !x.is_finite())) {
            return Attempt::NonFinite;
        }
        if next.theta.iter().any(|&t| t < THETA_FLOOR) {
            return Attempt::NegativeTheta;
        }
        for t in next.theta.iter_mut() {
            if *t < 0.0 {
                *t = 0.0;
            }
        }
        Attempt::Done(next)
    }

    /// Full right-hand side at `(t, u, v, theta)` into `k[slot]`; returns the source integral.
    fn full_rhs(&mut self, slot: usize, t: f64, u: &[f64], v: &[f64], theta: &[f64]) -> f64 {
        let cfg = self.config;
        let f = Fields { u, v, theta };
        let [du, dv, dth] = &mut self.k[slot];
        let s = explicit_part(cfg, t, f, &mut self.ws, du, dv, dth);
        mechanical_diffusion(cfg, v, theta, &mut self.ws);
        thermal_diffusion(cfg, theta, &mut self.ws);
        for i in 0..u.len() {
            dv[i] += self.ws.diff_v[i];
            dth[i] += self.ws.diff_theta[i];
        }
        s
    }

    fn rk4(&mut self, y: &State, dt: f64) -> Attempt {
        let n = y.u.len();
        let t = y.t;
        self.sources[0] = self.full_rhs(0, t, &y.u, &y.v, &y.theta);
        for (slot, (c, w)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            let mut st = std::mem::take(&mut self.stage);
            for f in 0..3 {
                let base = [&y.u, &y.v, &y.theta][f];
                let k = &self.k[slot][f];
                for i in 0..n {
                    st[f][i] = base[i] + w * dt * k[i];
                }
            }
            self.sources[slot + 1] = self.full_rhs(slot + 1, t + c * dt, &st[0], &st[1], &st[2]);
            self.stage = st;
        }
        let mut out = y.clone();
        let h6 = dt / 6.0;
        for f in 0..3 {
            let dst = match f {
                0 => &mut out.u,
                1 => &mut out.v,
                _ => &mut out.theta,
            };
            let [k1, k2, k3, k4] = [&self.k[0][f], &self.k[1][f], &self.k[2][f], &self.k[3][f]];
            for i in 0..n {
                dst[i] += h6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let s = &self.sources;
        self.last_heat = h6 * (s[0] + 2.0 * s[1] + 2.0 * s[2] + s[3]);
        self.finish(out)
    }

    /// Solves `(I - c D Laplacian) theta = rhs` in place.
    fn solve_heat(&mut self, c: f64, rhs: &mut [f64]) {
        let n = rhs.len();
        let dx = self.config.grid.dx();
        let r = c * self.config.d / (dx * dx);
        let [lo, di, up, scratch] = &mut self.tri;
        for i in 0..n {
            let left = if i > 0 { r } else { 0.0 };
            let right = if i + 1 < n { r } else { 0.0 };
            lo[i] = -left;
            up[i] = -right;
            di[i] = 1.0 + left + right;
        }
        solve_tridiagonal(lo, di, up, rhs, scratch);
    }

    /// Solves `(I - c div(gamma(theta) grad)) v = rhs` in place, faces from `theta`.
    fn solve_mechanical(&mut self, c: f64, theta: &[f64], rhs: &mut [f64]) {
        let n = rhs.len();
        let dx = self.config.grid.dx();
        face_coefficients(theta, &self.config.gamma, &mut self.ws.faces);
        let r = c / (dx * dx);
        let faces = &self.ws.faces;
        let [lo, di, up, scratch] = &mut self.tri;
        for i in 0..n {
            let left = if i > 0 { r * faces[i - 1] } else { 0.0 };
            let right = if i + 1 < n { r * faces[i] } else { 0.0 };
            lo[i] = -left;
            up[i] = -right;
            di[i] = 1.0 + left + right;
        }
        solve_tridiagonal(lo, di, up, rhs, scratch);
    }

    /// Two-stage IMEX Runge-Kutta: explicit tableau `[[0,0],[1,0]]`, implicit
    /// `[[g,0],[1-2g,g]]`, weights `(1/2, 1/2)` for both.
    fn imex(&mut self, y: &State, dt: f64) -> Attempt {
        let cfg = self.config;
        let n = y.u.len();
        let g = SDIRK_G;

        // stage 1: u1 = u, theta1 and v1 from the implicit solves
        let mut th1 = y.theta.clone();
        self.solve_heat(g * dt, &mut th1);
        let mut v1 = y.v.clone();
        self.solve_mechanical(g * dt, &th1, &mut v1);
        let f1 = Fields {
            u: &y.u,
            v: &v1,
            theta: &th1,
        };
        {
            let [du, dv, dth] = &mut self.k[0];
            self.sources[0] = explicit_part(cfg, y.t, f1, &mut self.ws, du, dv, dth);
        }
        mechanical_diffusion(cfg, &v1, &th1, &mut self.ws);
        thermal_diffusion(cfg, &th1, &mut self.ws);
        self.implicit[0].copy_from_slice(&self.ws.diff_v);
        self.implicit[1].copy_from_slice(&self.ws.diff_theta);

        // stage 2
        let w = (1.0 - 2.0 * g) * dt;
        let mut u2 = vec![0.0; n];
        let mut v2 = vec![0.0; n];
        let mut th2 = vec![0.0; n];
        {
            let [du, dv, dth] = &self.k[0];
            for i in 0..n {
                u2[i] = y.u[i] + dt * du[i];
                v2[i] = y.v[i] + dt * dv[i] + w * self.implicit[0][i];
                th2[i] = y.theta[i] + dt * dth[i] + w * self.implicit[1][i];
            }
        }
        self.solve_heat(g * dt, &mut th2);
        self.solve_mechanical(g * dt, &th2, &mut v2);
        let f2 = Fields {
            u: &u2,
            v: &v2,
            theta: &th2,
        };
        {
            let [du, dv, dth] = &mut self.k[1];
            self.sources[1] = explicit_part(cfg, y.t + dt, f2, &mut self.ws, du, dv, dth);
        }
        mechanical_diffusion(cfg, &v2, &th2, &mut self.ws);
        thermal_diffusion(cfg, &th2, &mut self.ws);
        self.implicit[2].copy_from_slice(&self.ws.diff_v);
        self.implicit[3].copy_from_slice(&self.ws.diff_theta);

        let h = 0.5 * dt;
        let mut out = y.clone();
        let [e1, e2] = [&self.k[0], &self.k[1]];
        let im = &self.implicit;
        for i in 0..n {
            out.u[i] += h * (e1[0][i] + e2[0][i]);
            out.v[i] += h * (e1[1][i] + e2[1][i] + im[0][i] + im[2][i]);
            out.theta[i] += h * (e1[2][i] + e2[2][i] + im[1][i] + im[3][i]);
        }
        self.last_heat = h * (self.sources[0] + self.sources[1]);
        self.finish(out)
    }
}

fn blown(state: &State, reason: BlowUpReason, value: f64, dt: f64) -> (State, StepOutcome) {
    (
        state.clone(),
        StepOutcome {
            status: StepStatus::BlownUp { reason, value },
            dt_used: dt,
        },
    )
}

/// Per-row quantities that are not part of the CSV series.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trace {
    /// `int gamma(theta) (v_x - a u_x)^2` at each row.
    pub source_rate: Vec<f64>,
    /// `int v_xx^2` at each row.
    pub vxx_energy: Vec<f64>,
    /// `max |theta - mean(theta)|` at each row.
    pub theta_osc: Vec<f64>,
    /// Extensibility monitor `||u_t||_{W^{1,2}} + ||theta||_inf` at each row.
    pub w12: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Largest decrease of `int theta` over a single accepted step (0 if it never decreased).
    pub max_heat_mass_drop: f64,
    #[serde(skip)]
    pub snapshots: Vec<State>,
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub series: DiagnosticsSeries,
    pub trace: Trace,
    pub final_state: State,
    pub outcome: StepOutcome,
    pub weight: FunctionalWeight,
}

impl SimulationResult {
    pub fn blew_up(&self) -> bool {
        self.outcome.blew_up()
    }
}

pub fn simulate(config: &SimulationConfig) -> Result<SimulationResult, SolverError> {
    simulate_with(config, |_| {})
}

/// Like [`simulate`], calling `observer` with the state at every recorded row.
pub fn simulate_with(config: &SimulationConfig, mut observer: impl FnMut(&State)) -> Result<SimulationResult, SolverError> {
    let mut integrator = Integrator::new(config)?;
    let weight = select_weight(config).map_err(|e| SolverError::InvalidConfig(e.to_string()))?;
    let mut state = config.initial_state()?;
    let dx = config.grid.dx();
    let interval = config.diagnostics.interval;
    let t_end = config.time.t_end;

    let mut series = DiagnosticsSeries::default();
    let mut trace = Trace::default();
    let mut diss = crate::functionals::DissipationTracker::new();
    let mut heat_in = 0.0;
    let mut last_dt = 0.0;
    let mut rows = 0usize;

    let mut record = |state: &State, dt: f64, heat_in: f64, series: &mut DiagnosticsSeries, trace: &mut Trace| {
        let p = probe(state, config, weight.b);
        let diss_total = diss.push(state.t, p.vxx_energy);
        series.rows.push(DiagnosticsRow {
            t: state.t,
            dt,
            ux_l2: p.ux_l2,
            ux_linf: p.ux_linf,
            vx_l2: p.vx_l2,
            vx_linf: p.vx_linf,
            theta_linf: p.theta_linf,
            thetax_l2: p.thetax_l2,
            mass_u: p.masses.u,
            mass_ut: p.masses.ut,
            mass_theta: p.masses.theta,
            y_b: p.y_b,
            diss_vxx: diss_total,
            heat_in,
        });
        trace.source_rate.push(p.source_rate);
        trace.vxx_energy.push(p.vxx_energy);
        trace.theta_osc.push(p.theta_osc);
        trace.w12.push(p.w12);
        let stride = config.diagnostics.snapshot_stride;
        if stride > 0 && rows.is_multiple_of(stride) {
            trace.snapshots.push(state.clone());
        }
        rows += 1;
        observer(state);
    };

    record(&state, 0.0, 0.0, &mut series, &mut trace);
    let mut k = 1u64;
    let mut theta_mass: f64 = state.theta.iter().sum::<f64>() * dx;
    let outcome = loop {
        let target = (k as f64 * interval).min(t_end);
        let (next, outcome) = integrator.step(&state, target);
        if outcome.blew_up() {
            if state.t > series.rows.last().map_or(0.0, |r| r.t) {
                record(&state, last_dt, heat_in, &mut series, &mut trace);
            }
            break outcome;
        }
        trace.accepted_steps += 1;
        heat_in += integrator.last_heat;
        last_dt = outcome.dt_used;
        let mass: f64 = next.theta.iter().sum::<f64>() * dx;
        trace.max_heat_mass_drop = trace.max_heat_mass_drop.max(theta_mass - mass);
        theta_mass = mass;
        state = next;
        if state.t == target {
            record(&state, last_dt, heat_in, &mut series, &mut trace);
            k += 1;
        }
        if matches!(outcome.status, StepStatus::Finished) {
            break outcome;
        }
    };
    trace.rejected_steps = integrator.rejected;
    Ok(SimulationResult {
        series,
        trace,
        final_state: state,
        outcome,
        weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::GammaModel;
    use crate::solver::{Grid, InitialData, Profile};

    fn cfg(n: usize, gamma: GammaModel, d: f64, a: f64, data: InitialData, t_end: f64, scheme: Scheme) -> SimulationConfig {
        let mut c = SimulationConfig::new(Grid::new(1.0, n).unwrap(), a, d, gamma, data, t_end);
        c.time.scheme = scheme;
        c
    }

    #[test]
    fn stable_dt_examples() {
        let g = GammaModel::constant(1.0).unwrap();
        let mut c = cfg(10, g.clone(), 1.0, 1.0, InitialData::flat(0.0, 0.0, 0.0), 10.0, Scheme::Rk4);
        c.diagnostics.interval = 1.0;
        let s = c.initial_state().unwrap();
        assert!((stable_dt(&s, &c) - 0.0045).abs() < 1e-15);
        let mut c10 = c.clone();
        c10.d = 10.0;
        assert!((stable_dt(&s, &c10) - 0.00045).abs() < 1e-15);
        let mut near = s.clone();
        near.t = 10.0 - 1e-3;
        assert!((stable_dt(&near, &c) - 1e-3).abs() < 1e-12);
        let mut before_row = s.clone();
        before_row.t = 2.0 - 1e-4;
        assert!((stable_dt(&before_row, &c) - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn steady_flat_state_is_unchanged() {
        for scheme in [Scheme::Rk4, Scheme::Imex] {
            let c = cfg(
                16,
                GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap(),
                1.0,
                0.8,
                InitialData::flat(1.3, 0.0, 0.2),
                0.5,
                scheme,
            );
            let r = simulate(&c).unwrap();
            assert_eq!(r.outcome.status, StepStatus::Finished);
            let s0 = c.initial_state().unwrap();
            for (x, y) in r.final_state.u.iter().chain(&r.final_state.v).zip(s0.u.iter().chain(&s0.v)) {
                assert!((x - y).abs() < 1e-13);
            }
            let row = r.series.rows.last().unwrap();
            assert!(row.ux_linf == 0.0 && row.vx_linf == 0.0 && row.y_b == 0.0);
        }
    }

    #[test]
    fn moving_flat_state_is_exact() {
        let (u0, c0, t_end) = (0.4, 0.3, 2.0);
        for scheme in [Scheme::Rk4, Scheme::Imex] {
            let c = cfg(
                16,
                GammaModel::constant(1.0).unwrap(),
                1.0,
                1.1,
                InitialData::flat(u0, c0, 0.0),
                t_end,
                scheme,
            );
            let r = simulate(&c).unwrap();
            for u in &r.final_state.u {
                assert!((u - (u0 + c0 * t_end)).abs() < 1e-10, "{scheme:?}: {u}");
            }
        }
    }

    #[test]
    fn rows_land_on_schedule() {
        let mut c = cfg(
            32,
            GammaModel::constant(1.0).unwrap(),
            1.0,
            1.0,
            InitialData {
                u0: Profile::CosineBump {
                    offset: 0.0,
                    amplitude: 1.0,
                    mode: 1,
                },
                ..InitialData::flat(0.0, 0.0, 0.1)
            },
            1.0,
            Scheme::Imex,
        );
        c.diagnostics.interval = 0.1;
        let r = simulate(&c).unwrap();
        let ts = r.series.times();
        assert_eq!(ts.len(), 11);
        for (k, t) in ts.iter().enumerate() {
            assert!((t - 0.1 * k as f64).abs() < 1e-12);
        }
        assert_eq!(*ts.last().unwrap(), 1.0);
    }

    #[test]
    fn conservation_and_heat_bookkeeping() {
        for scheme in [Scheme::Rk4, Scheme::Imex] {
            let mut c = cfg(
                64,
                GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap(),
                1.0,
                1.0,
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
                },
                0.5,
                scheme,
            );
            c.diagnostics.interval = 0.01;
            let r = simulate(&c).unwrap();
            let first = r.series.rows[0];
            for row in &r.series.rows {
                assert!((row.mass_ut - first.mass_ut).abs() < 1e-12);
                assert!((row.mass_u - first.mass_u - row.t * first.mass_ut).abs() < 1e-12);
                let gained = row.mass_theta - first.mass_theta;
                assert!((gained - row.heat_in).abs() < 1e-12 * (1.0 + row.heat_in));
            }
            assert!(r.trace.max_heat_mass_drop <= 1e-12);
        }
    }

    #[test]
    fn determinism() {
        let c = cfg(
            32,
            GammaModel::logarithmic(1.0, 0.3).unwrap(),
            1.0,
            1.0,
            InitialData {
                u0: Profile::CosineBump {
                    offset: 0.0,
                    amplitude: 1.0,
                    mode: 2,
                },
                ..InitialData::flat(0.0, 0.5, 0.1)
            },
            0.3,
            Scheme::Imex,
        );
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn single_step_reaches_boundary_or_less() {
        let mut c = cfg(
            16,
            GammaModel::constant(1.0).unwrap(),
            1.0,
            1.0,
            InitialData::flat(0.0, 0.0, 0.0),
            1.0,
            Scheme::Imex,
        );
        c.diagnostics.interval = 1e-4;
        let s = c.initial_state().unwrap();
        let (next, out) = step(&s, &c).unwrap();
        assert_eq!(next.t, 1e-4);
        assert_eq!(out.status, StepStatus::Accepted);
    }
}
