use super::stencil::{face_coefficients, flux_divergence, laplacian, nodal_gradient, quadrature};
use super::{SimulationConfig, SolverError, State};

/// Time derivatives of `(u, v, theta)` at every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhs {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
}

/// Semi-discrete right-hand side, including manufactured forcing when configured.
pub fn discrete_rhs(state: &State, config: &SimulationConfig) -> Result<Rhs, SolverError> {
    state.check(&config.grid)?;
    let n = config.grid.n_cells();
    let mut ws = Workspace::new(n);
    let mut rhs = Rhs {
        du: vec![0.0; n],
        dv: vec![0.0; n],
        dtheta: vec![0.0; n],
    };
    let fields = Fields {
        u: &state.u,
        v: &state.v,
        theta: &state.theta,
    };
    explicit_part(config, state.t, fields, &mut ws, &mut rhs.du, &mut rhs.dv, &mut rhs.dtheta);
    mechanical_diffusion(config, fields.v, fields.theta, &mut ws);
    thermal_diffusion(config, fields.theta, &mut ws);
    for i in 0..n {
        rhs.dv[i] += ws.diff_v[i];
        rhs.dtheta[i] += ws.diff_theta[i];
    }
    Ok(rhs)
}

#[derive(Clone, Copy)]
pub(crate) struct Fields<'a> {
    pub u: &'a [f64],
    pub v: &'a [f64],
    pub theta: &'a [f64],
}

/// Scratch buffers reused across right-hand-side evaluations.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    pub grad_v: Vec<f64>,
    pub grad_u: Vec<f64>,
    pub source: Vec<f64>,
    pub faces: Vec<f64>,
    pub diff_v: Vec<f64>,
    pub diff_theta: Vec<f64>,
    pub forcing_v: Vec<f64>,
    pub forcing_theta: Vec<f64>,
    /// Time at which the forcing buffers were last filled.
    pub forcing_t: f64,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            grad_v: vec![0.0; n],
            grad_u: vec![0.0; n],
            source: vec![0.0; n],
            faces: vec![0.0; n.saturating_sub(1)],
            diff_v: vec![0.0; n],
            diff_theta: vec![0.0; n],
            forcing_v: vec![0.0; n],
            forcing_theta: vec![0.0; n],
            forcing_t: f64::NAN,
        }
    }
}

/// Frictional heat source `gamma(theta) (v_x - a u_x)^2` into `ws.source`; returns its integral.
pub(crate) fn heat_source(config: &SimulationConfig, f: Fields<'_>, ws: &mut Workspace) -> f64 {
    let dx = config.grid.dx();
    nodal_gradient(f.v, dx, &mut ws.grad_v);
    nodal_gradient(f.u, dx, &mut ws.grad_u);
    let a = config.a;
    for i in 0..f.theta.len() {
        let strain_rate = ws.grad_v[i] - a * ws.grad_u[i];
        ws.source[i] = config.gamma.value(f.theta[i]) * strain_rate * strain_rate;
    }
    quadrature(&ws.source, dx)
}

/// Non-stiff part: reaction terms, heat source and forcing. Returns the source integral.
pub(crate) fn explicit_part(
    config: &SimulationConfig,
    t: f64,
    f: Fields<'_>,
    ws: &mut Workspace,
    du: &mut [f64],
    dv: &mut [f64],
    dtheta: &mut [f64],
) -> f64 {
    let a = config.a;
    let source = heat_source(config, f, ws);
    for i in 0..f.u.len() {
        du[i] = f.v[i] - a * f.u[i];
        dv[i] = a * du[i];
        dtheta[i] = ws.source[i];
    }
    if let Some(target) = &config.forcing {
        // RK4 evaluates the midpoint time twice
        if ws.forcing_t != t {
            super::mms::forcing_into(target.as_ref(), config, t, &mut ws.forcing_v, &mut ws.forcing_theta);
            ws.forcing_t = t;
        }
        for i in 0..f.u.len() {
            dv[i] += ws.forcing_v[i];
            dtheta[i] += ws.forcing_theta[i];
        }
    }
    source
}

/// `(gamma(theta) v_x)_x` into `ws.diff_v`.
pub(crate) fn mechanical_diffusion(config: &SimulationConfig, v: &[f64], theta: &[f64], ws: &mut Workspace) {
    face_coefficients(theta, &config.gamma, &mut ws.faces);
    flux_divergence(v, &ws.faces, config.grid.dx(), &mut ws.diff_v);
}

/// `D theta_xx` into `ws.diff_theta`.
pub(crate) fn thermal_diffusion(config: &SimulationConfig, theta: &[f64], ws: &mut Workspace) {
    laplacian(theta, config.grid.dx(), &mut ws.diff_theta);
    for x in ws.diff_theta.iter_mut() {
        *x *= config.d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::GammaModel;
    use crate::solver::{Grid, InitialData, Profile};
    use std::f64::consts::PI;

    fn config(n: usize, gamma: GammaModel, a: f64) -> SimulationConfig {
        SimulationConfig::new(
            Grid::new(1.0, n).unwrap(),
            a,
            1.0,
            gamma,
            InitialData::flat(0.0, 0.0, 0.0),
            1.0,
        )
    }

    #[test]
    fn flat_equilibrium_is_steady() {
        let a = 0.7;
        let cfg = config(16, GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap(), a);
        let s = State {
            t: 0.0,
            u: vec![1.0; 16],
            v: vec![a; 16],
            theta: vec![0.0; 16],
        };
        let r = discrete_rhs(&s, &cfg).unwrap();
        assert!(r.du.iter().chain(&r.dv).chain(&r.dtheta).all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn flat_moving_state() {
        // u_t = v - a u = c, v_t = a c
        let (a, c, u0) = (0.7, 0.3, 2.0);
        let cfg = config(16, GammaModel::constant(1.0).unwrap(), a);
        let s = State {
            t: 0.0,
            u: vec![u0; 16],
            v: vec![c + a * u0; 16],
            theta: vec![0.4; 16],
        };
        let r = discrete_rhs(&s, &cfg).unwrap();
        for i in 0..16 {
            assert!((r.du[i] - c).abs() < 1e-14);
            assert!((r.dv[i] - a * c).abs() < 1e-14);
            assert!(r.dtheta[i].abs() < 1e-14);
        }
    }

    #[test]
    fn neumann_eigenfunction_second_order() {
        // v = cos(pi x), gamma = c: dv = -c pi^2 cos + a cos
        let (c, a) = (1.3, 0.5);
        let mut errs = Vec::new();
        for n in [32, 64, 128, 256] {
            let cfg = config(n, GammaModel::constant(c).unwrap(), a);
            let xs = cfg.grid.nodes();
            let s = State {
                t: 0.0,
                u: vec![0.0; n],
                v: xs.iter().map(|x| (PI * x).cos()).collect(),
                theta: vec![0.0; n],
            };
            let r = discrete_rhs(&s, &cfg).unwrap();
            let err = xs
                .iter()
                .zip(&r.dv)
                .map(|(x, dv)| (dv - (-c * PI * PI + a) * (PI * x).cos()).abs())
                .fold(0.0, f64::max);
            errs.push(err);
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.8..4.2).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn rejects_non_finite_state() {
        let cfg = config(8, GammaModel::constant(1.0).unwrap(), 1.0);
        let mut s = State {
            t: 0.0,
            u: vec![0.0; 8],
            v: vec![0.0; 8],
            theta: vec![0.0; 8],
        };
        s.theta[2] = f64::INFINITY;
        assert!(discrete_rhs(&s, &cfg).is_err());
        let _ = Profile::Flat { value: 0.0 };
    }
}
