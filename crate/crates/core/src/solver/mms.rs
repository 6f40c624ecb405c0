use std::f64::consts::PI;

use super::{Grid, InitialData, Profile, SimulationConfig, SolverError};

/// Closed-form target `(u*, theta*)` with the partial derivatives needed for the forcing.
pub trait ManufacturedSolution: Send + Sync {
    fn name(&self) -> &str;
    fn length(&self) -> f64;
    fn u(&self, x: f64, t: f64) -> f64;
    fn u_x(&self, x: f64, t: f64) -> f64;
    fn u_xx(&self, x: f64, t: f64) -> f64;
    fn u_t(&self, x: f64, t: f64) -> f64;
    fn u_tt(&self, x: f64, t: f64) -> f64;
    fn u_xt(&self, x: f64, t: f64) -> f64;
    fn u_xxt(&self, x: f64, t: f64) -> f64;
    fn theta(&self, x: f64, t: f64) -> f64;
    fn theta_x(&self, x: f64, t: f64) -> f64;
    fn theta_xx(&self, x: f64, t: f64) -> f64;
    fn theta_t(&self, x: f64, t: f64) -> f64;
}

/// `u* = A_u cos(k pi x / L) e^{-r t}`, `theta* = m + A_th cos(k pi x / L) e^{-r t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineTarget {
    pub length: f64,
    pub amp_u: f64,
    pub theta_mean: f64,
    pub amp_theta: f64,
    pub rate: f64,
    pub mode: u32,
}

impl CosineTarget {
    pub fn standard(length: f64) -> Self {
        Self {
            length,
            amp_u: 1.0,
            theta_mean: 1.0,
            amp_theta: 0.1,
            rate: 1.0,
            mode: 1,
        }
    }

    fn k(&self) -> f64 {
        self.mode as f64 * PI / self.length
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }
}

impl ManufacturedSolution for CosineTarget {
    fn name(&self) -> &str {
        "cosine"
    }
    fn length(&self) -> f64 {
        self.length
    }
    fn u(&self, x: f64, t: f64) -> f64 {
        self.amp_u * (self.k() * x).cos() * self.decay(t)
    }
    fn u_x(&self, x: f64, t: f64) -> f64 {
        -self.amp_u * self.k() * (self.k() * x).sin() * self.decay(t)
    }
    fn u_xx(&self, x: f64, t: f64) -> f64 {
        -self.k() * self.k() * self.u(x, t)
    }
    fn u_t(&self, x: f64, t: f64) -> f64 {
        -self.rate * self.u(x, t)
    }
    fn u_tt(&self, x: f64, t: f64) -> f64 {
        self.rate * self.rate * self.u(x, t)
    }
    fn u_xt(&self, x: f64, t: f64) -> f64 {
        -self.rate * self.u_x(x, t)
    }
    fn u_xxt(&self, x: f64, t: f64) -> f64 {
        -self.rate * self.u_xx(x, t)
    }
    fn theta(&self, x: f64, t: f64) -> f64 {
        self.theta_mean + self.amp_theta * (self.k() * x).cos() * self.decay(t)
    }
    fn theta_x(&self, x: f64, t: f64) -> f64 {
        -self.amp_theta * self.k() * (self.k() * x).sin() * self.decay(t)
    }
    fn theta_xx(&self, x: f64, t: f64) -> f64 {
        -self.k() * self.k() * (self.theta(x, t) - self.theta_mean)
    }
    fn theta_t(&self, x: f64, t: f64) -> f64 {
        -self.rate * (self.theta(x, t) - self.theta_mean)
    }
}

/// Spatially flat motion `u* = u0 + c t`, `theta* = theta0`; solves the unforced system exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatTarget {
    pub length: f64,
    pub u0: f64,
    pub c: f64,
    pub theta0: f64,
}

impl FlatTarget {
    pub fn standard(length: f64) -> Self {
        Self {
            length,
            u0: 0.5,
            c: 0.25,
            theta0: 0.2,
        }
    }
}

impl ManufacturedSolution for FlatTarget {
    fn name(&self) -> &str {
        "flat"
    }
    fn length(&self) -> f64 {
        self.length
    }
    fn u(&self, _: f64, t: f64) -> f64 {
        self.u0 + self.c * t
    }
    fn u_x(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn u_xx(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn u_t(&self, _: f64, _: f64) -> f64 {
        self.c
    }
    fn u_tt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn u_xt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn u_xxt(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn theta(&self, _: f64, _: f64) -> f64 {
        self.theta0
    }
    fn theta_x(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn theta_xx(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn theta_t(&self, _: f64, _: f64) -> f64 {
        0.0
    }
}

/// Forcing added to the `v` and `theta` equations; the `u` equation needs none.
#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Residual forcing at the cell centres at time `t` so that the target solves the forced system.
pub fn manufactured_forcing(
    target: &dyn ManufacturedSolution,
    config: &SimulationConfig,
    t: f64,
) -> Result<Forcing, SolverError> {
    check_compatible(target, &config.grid)?;
    let n = config.grid.n_cells();
    let mut f = Forcing {
        v: vec![0.0; n],
        theta: vec![0.0; n],
    };
    forcing_into(target, config, t, &mut f.v, &mut f.theta);
    Ok(f)
}

pub(crate) fn forcing_into(
    target: &dyn ManufacturedSolution,
    config: &SimulationConfig,
    t: f64,
    fv: &mut [f64],
    ftheta: &mut [f64],
) {
    let a = config.a;
    for i in 0..fv.len() {
        let x = config.grid.x(i);
        let th = target.theta(x, t).max(0.0);
        let g = config.gamma.eval_unchecked(th);
        let v_x = target.u_xt(x, t) + a * target.u_x(x, t);
        let v_xx = target.u_xxt(x, t) + a * target.u_xx(x, t);
        // v_t - a v + a^2 u collapses to u_tt
        fv[i] = target.u_tt(x, t) - g.d1 * target.theta_x(x, t) * v_x - g.value * v_xx;
        let u_xt = target.u_xt(x, t);
        ftheta[i] = target.theta_t(x, t) - config.d * target.theta_xx(x, t) - g.value * u_xt * u_xt;
    }
}

/// Target must satisfy the Neumann conditions and stay nonnegative in temperature.
pub(crate) fn check_compatible(target: &dyn ManufacturedSolution, grid: &Grid) -> Result<(), SolverError> {
    if (target.length() - grid.length()).abs() > 1e-12 * grid.length() {
        return Err(SolverError::Manufactured(format!(
            "target length {} differs from grid length {}",
            target.length(),
            grid.length()
        )));
    }
    let l = grid.length();
    for t in [0.0, 0.5, 1.0] {
        for x in [0.0, l] {
            let scale = 1.0 + target.u(0.5 * l, t).abs() + target.theta(0.5 * l, t).abs();
            for (name, val) in [
                ("u_x", target.u_x(x, t)),
                ("u_xt", target.u_xt(x, t)),
                ("theta_x", target.theta_x(x, t)),
            ] {
                if val.abs() > 1e-10 * scale {
                    return Err(SolverError::Manufactured(format!(
                        "{name} = {val:e} at x = {x}, t = {t}; Neumann compatibility requires 0"
                    )));
                }
            }
        }
    }
    for i in 0..grid.n_cells() {
        let th = target.theta(grid.x(i), 0.0);
        if th < 0.0 {
            return Err(SolverError::Manufactured(format!("theta* = {th} < 0 at x = {}", grid.x(i))));
        }
    }
    Ok(())
}

/// Initial data sampled from the target at `t = 0`.
pub fn manufactured_initial_data(target: &dyn ManufacturedSolution, grid: &Grid) -> InitialData {
    let sample = |f: &dyn Fn(f64) -> f64| Profile::Tabulated {
        values: (0..grid.n_cells()).map(|i| f(grid.x(i))).collect(),
    };
    InitialData {
        u0: sample(&|x| target.u(x, 0.0)),
        ut0: sample(&|x| target.u_t(x, 0.0)),
        theta0: sample(&|x| target.theta(x, 0.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::GammaModel;
    use std::sync::Arc;

    struct Zero;

    impl ManufacturedSolution for Zero {
        fn name(&self) -> &str {
            "zero"
        }
        fn length(&self) -> f64 {
            1.0
        }
        fn u(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_x(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_xx(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_t(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_tt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_xt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_xxt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta_x(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta_xx(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta_t(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    /// `cos` replaced by `sin`: slope at the left wall is nonzero.
    struct Sine;

    impl ManufacturedSolution for Sine {
        fn name(&self) -> &str {
            "sine"
        }
        fn length(&self) -> f64 {
            1.0
        }
        fn u(&self, x: f64, _: f64) -> f64 {
            (PI * x).sin()
        }
        fn u_x(&self, x: f64, _: f64) -> f64 {
            PI * (PI * x).cos()
        }
        fn u_xx(&self, x: f64, _: f64) -> f64 {
            -PI * PI * (PI * x).sin()
        }
        fn u_t(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_tt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_xt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn u_xxt(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta(&self, _: f64, _: f64) -> f64 {
            1.0
        }
        fn theta_x(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta_xx(&self, _: f64, _: f64) -> f64 {
            0.0
        }
        fn theta_t(&self, _: f64, _: f64) -> f64 {
            0.0
        }
    }

    fn config(gamma: GammaModel) -> SimulationConfig {
        SimulationConfig::new(
            Grid::new(1.0, 32).unwrap(),
            0.8,
            0.7,
            gamma,
            InitialData::flat(0.0, 0.0, 0.0),
            1.0,
        )
    }

    #[test]
    fn zero_target_zero_forcing() {
        let cfg = config(GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap());
        let f = manufactured_forcing(&Zero, &cfg, 0.3).unwrap();
        assert!(f.v.iter().chain(&f.theta).all(|x| *x == 0.0));
    }

    #[test]
    fn non_neumann_target_rejected() {
        let cfg = config(GammaModel::constant(1.0).unwrap());
        assert!(matches!(
            manufactured_forcing(&Sine, &cfg, 0.0),
            Err(SolverError::Manufactured(_))
        ));
    }

    #[test]
    fn spatially_constant_target_has_no_gradient_terms() {
        // amp = 0 leaves u* = 0 and theta* = m; only theta_t - D theta_xx = 0 remains
        let target = CosineTarget {
            amp_u: 0.0,
            amp_theta: 0.0,
            ..CosineTarget::standard(1.0)
        };
        let cfg = config(GammaModel::logarithmic(1.0, 1.0).unwrap());
        let f = manufactured_forcing(&target, &cfg, 0.2).unwrap();
        assert!(f.v.iter().chain(&f.theta).all(|x| *x == 0.0));
    }

    #[test]
    fn forcing_matches_pointwise_residual() {
        // rebuild the residual from the continuous operator with finite differences in x and t
        let target = CosineTarget::standard(1.0);
        let mut cfg = config(GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap());
        let f = manufactured_forcing(&target, &cfg, 0.4).unwrap();
        let (a, d, h) = (cfg.a, cfg.d, 1e-4);
        let v = |x: f64, t: f64| target.u_t(x, t) + a * target.u(x, t);
        let gam = |x: f64, t: f64| cfg.gamma.eval(target.theta(x, t)).unwrap().value;
        let flux = |x: f64, t: f64| gam(x, t) * (v(x + h, t) - v(x - h, t)) / (2.0 * h);
        for i in [3, 10, 20] {
            let x = cfg.grid.x(i);
            let t = 0.4;
            let v_t = (v(x, t + h) - v(x, t - h)) / (2.0 * h);
            let div = (flux(x + h, t) - flux(x - h, t)) / (2.0 * h);
            let fv = v_t - div - a * v(x, t) + a * a * target.u(x, t);
            assert!((fv - f.v[i]).abs() < 1e-5, "{fv} vs {}", f.v[i]);
            let u_xt = (target.u_t(x + h, t) - target.u_t(x - h, t)) / (2.0 * h);
            let th = |x: f64, t: f64| target.theta(x, t);
            let th_t = (th(x, t + h) - th(x, t - h)) / (2.0 * h);
            let th_xx = (th(x + h, t) - 2.0 * th(x, t) + th(x - h, t)) / (h * h);
            let ft = th_t - d * th_xx - gam(x, t) * u_xt * u_xt;
            assert!((ft - f.theta[i]).abs() < 1e-5, "{ft} vs {}", f.theta[i]);
        }
        cfg.forcing = Some(Arc::new(target));
    }
}
