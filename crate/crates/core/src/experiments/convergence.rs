use std::collections::BTreeMap;

use serde::Serialize;

use super::ExperimentError;
use crate::analysis::CheckReport;
use crate::par::Execution;
use crate::solver::{manufactured_initial_data, simulate, SimulationConfig, SolverError, State};

/// Errors at or below this are treated as roundoff: the scheme reproduces the target exactly.
pub const EXACT_TOL: f64 = 1e-10;

const NORMS: [&str; 6] = ["u_l2", "u_linf", "v_l2", "v_linf", "theta_l2", "theta_linf"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceLevel {
    pub n_cells: usize,
    /// Error against the target at `t_end`, keyed `u_l2`, `u_linf`, `v_l2`, ...
    pub errors: BTreeMap<String, f64>,
}

/// `log2(e_k / e_{k+1})` for consecutive levels of one norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormOrders {
    pub norm: String,
    pub orders: Vec<f64>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub target: String,
    pub levels: Vec<ConvergenceLevel>,
    pub orders: Vec<NormOrders>,
    /// Every norm decreases under refinement.
    pub monotone: bool,
    /// Every error is at roundoff level; orders are then meaningless and left empty.
    pub exact: bool,
}

impl ConvergenceReport {
    pub fn min_order(&self) -> f64 {
        self.orders
            .iter()
            .flat_map(|o| o.orders.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_order(&self) -> f64 {
        self.orders
            .iter()
            .flat_map(|o| o.orders.iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Passes when exact, or when errors decrease and every observed order lies in `[min, max]`.
    pub fn to_report(&self, min: f64, max: f64) -> CheckReport {
        let pass = self.exact || (self.monotone && self.min_order() >= min && self.max_order() <= max);
        let mut r = CheckReport::new("convergence_order", pass).metric("exact", if self.exact { 1.0 } else { 0.0 });
        if !self.exact {
            r = r.metric("min_order", self.min_order()).metric("max_order", self.max_order());
            for o in &self.orders {
                if let Some(last) = o.orders.last() {
                    r = r.metric(&format!("order_{}", o.norm), *last);
                }
            }
        }
        r
    }
}

fn level_errors(config: &SimulationConfig, state: &State) -> BTreeMap<String, f64> {
    let target = config.forcing.as_ref().expect("checked by caller");
    let (grid, a, t) = (&config.grid, config.a, state.t);
    let dx = grid.dx();
    let mut sums = [0.0f64; 3];
    let mut maxs = [0.0f64; 3];
    for i in 0..grid.n_cells() {
        let x = grid.x(i);
        let exact = [target.u(x, t), target.u_t(x, t) + a * target.u(x, t), target.theta(x, t)];
        let got = [state.u[i], state.v[i], state.theta[i]];
        for k in 0..3 {
            let e = (got[k] - exact[k]).abs();
            sums[k] += e * e * dx;
            maxs[k] = maxs[k].max(e);
        }
    }
    let values = [sums[0].sqrt(), maxs[0], sums[1].sqrt(), maxs[1], sums[2].sqrt(), maxs[2]];
    NORMS.iter().map(|n| n.to_string()).zip(values).collect()
}

/// Runs the manufactured-solution configuration at `levels` grids, doubling the
/// cell count each time, and reports errors at `t_end` and observed orders.
pub fn convergence_study(base: &SimulationConfig, levels: usize) -> Result<ConvergenceReport, ExperimentError> {
    convergence_study_with(base, levels, Execution::default())
}

pub fn convergence_study_with(
    base: &SimulationConfig,
    levels: usize,
    exec: Execution,
) -> Result<ConvergenceReport, ExperimentError> {
    let solver_err = |source: SolverError| ExperimentError::Solver {
        context: "convergence study".into(),
        source,
    };
    let Some(target) = base.forcing.clone() else {
        return Err(solver_err(SolverError::InvalidConfig(
            "convergence study requires mms.target".into(),
        )));
    };
    if levels < 3 {
        return Err(solver_err(SolverError::InvalidConfig(format!(
            "at least 3 levels required (got {levels})"
        ))));
    }
    let runs = exec.map(levels, |k| {
        let mut c = base.clone();
        c.grid = base.grid.refined(1 << k);
        c.initial = manufactured_initial_data(target.as_ref(), &c.grid);
        let r = simulate(&c)?;
        if r.final_state.t != c.time.t_end {
            return Err(SolverError::InvalidConfig(format!(
                "level n = {} stopped at t = {} ({:?})",
                c.grid.n_cells(),
                r.final_state.t,
                r.outcome.status
            )));
        }
        Ok(ConvergenceLevel {
            n_cells: c.grid.n_cells(),
            errors: level_errors(&c, &r.final_state),
        })
    });
    let levels: Vec<ConvergenceLevel> = runs.into_iter().collect::<Result<_, _>>().map_err(solver_err)?;
    let exact = levels.iter().all(|l| l.errors.values().all(|&e| e <= EXACT_TOL));
    let mut orders = Vec::new();
    let mut monotone = true;
    for norm in NORMS {
        let errs: Vec<f64> = levels.iter().map(|l| l.errors[norm]).collect();
        let mono = errs.windows(2).all(|w| w[1] < w[0]);
        if !exact {
            monotone &= mono;
        }
        orders.push(NormOrders {
            norm: norm.into(),
            orders: if exact {
                Vec::new()
            } else {
                errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
            },
            monotone: mono,
        });
    }
    Ok(ConvergenceReport {
        target: target.name().to_string(),
        levels,
        orders,
        monotone,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gamma::GammaModel;
    use crate::solver::{FlatTarget, Grid, Scheme};

    #[test]
    fn flat_target_is_exact() {
        let grid = Grid::new(1.0, 16).unwrap();
        let target = FlatTarget::standard(1.0);
        let initial = manufactured_initial_data(&target, &grid);
        let mut c = SimulationConfig::new(
            grid,
            1.0,
            1.0,
            GammaModel::saturating_exp(1.0, 0.5, 1.0).unwrap(),
            initial,
            0.05,
        );
        c.time.scheme = Scheme::Rk4;
        c.forcing = Some(Arc::new(target));
        let r = convergence_study(&c, 3).unwrap();
        assert!(r.exact, "{:?}", r.levels);
        assert!(r.orders.iter().all(|o| o.orders.is_empty()));
        assert!(r.to_report(1.8, 2.2).pass);
        assert_eq!(r.levels.iter().map(|l| l.n_cells).collect::<Vec<_>>(), vec![16, 32, 64]);
    }

    #[test]
    fn needs_forcing_and_three_levels() {
        let grid = Grid::new(1.0, 16).unwrap();
        let c = SimulationConfig::new(
            grid,
            1.0,
            1.0,
            GammaModel::constant(1.0).unwrap(),
            crate::solver::InitialData::flat(0.0, 0.0, 0.0),
            0.1,
        );
        assert!(convergence_study(&c, 3).is_err());
    }
}
