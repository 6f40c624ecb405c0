use serde::Serialize;

use super::{AnalysisError, CheckReport};
use crate::par::Execution;

/// Exhaustive pair search is O(n^2); larger inputs are rejected.
pub const GN_MAX_CELLS: usize = 2048;
/// Relative slack on the right-hand side.
pub const GN_REL_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnBound {
    /// `||phi||_inf`
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Hoelder seminorm `[phi]_alpha` over all grid pairs.
    pub seminorm: f64,
    pub lp_norm: f64,
}

impl GnBound {
    pub fn to_report(&self) -> CheckReport {
        CheckReport::new("interpolation", self.holds)
            .metric("lhs", self.lhs)
            .metric("rhs", self.rhs)
            .metric("seminorm", self.seminorm)
            .metric("lp_norm", self.lp_norm)
    }
}

/// `max_{i != j} |phi_i - phi_j| / |x_i - x_j|^alpha` over cell centres.
pub fn holder_seminorm(samples: &[f64], alpha: f64, dx: f64, exec: Execution) -> f64 {
    let n = samples.len();
    let best = exec.max(n, |i| {
        let mut m = 0.0f64;
        for j in i + 1..n {
            let d = ((j - i) as f64 * dx).powf(alpha);
            m = m.max((samples[i] - samples[j]).abs() / d);
        }
        m
    });
    best.max(0.0)
}

/// Both sides of
/// `||phi||_inf <= K1 [phi]_alpha^{1/(p alpha + 1)} ||phi||_p^{p alpha/(p alpha + 1)} + K2 ||phi||_p`
/// with `K1 = (p alpha + 1) / (p alpha)^{p alpha/(p alpha + 1)}` and
/// `K2 = (p alpha + 1) / (p alpha |Omega|^{1/p})`.
pub fn gn_bound(samples: &[f64], alpha: f64, p: f64, length: f64) -> Result<GnBound, AnalysisError> {
    gn_bound_with(samples, alpha, p, length, Execution::default())
}

pub fn gn_bound_with(samples: &[f64], alpha: f64, p: f64, length: f64, exec: Execution) -> Result<GnBound, AnalysisError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "alpha in (0, 1) required (got {alpha})"
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!("p in [1, inf) required (got {p})")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!("length > 0 required (got {length})")));
    }
    let n = samples.len();
    if n == 0 || n > GN_MAX_CELLS {
        return Err(AnalysisError::InvalidArgument(format!(
            "1..={GN_MAX_CELLS} samples required (got {n})"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(AnalysisError::InvalidArgument("samples must be finite".into()));
    }
    let dx = length / n as f64;
    let lhs = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lp_norm = (samples.iter().map(|v| v.abs().powf(p)).sum::<f64>() * dx).powf(1.0 / p);
    let seminorm = holder_seminorm(samples, alpha, dx, exec);
    let q = p * alpha;
    let first = if seminorm > 0.0 {
        (q + 1.0) / q.powf(q / (q + 1.0)) * seminorm.powf(1.0 / (q + 1.0)) * lp_norm.powf(q / (q + 1.0))
    } else {
        0.0
    };
    let second = (q + 1.0) / (q * length.powf(1.0 / p)) * lp_norm;
    let rhs = first + second;
    Ok(GnBound {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + GN_REL_TOL),
        seminorm,
        lp_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function() {
        let r = gn_bound(&[1.0; 64], 0.5, 1.0, 1.0).unwrap();
        assert_eq!(r.lhs, 1.0);
        assert!((r.rhs - 3.0).abs() < 1e-12);
        assert!(r.holds && r.seminorm == 0.0);
    }

    #[test]
    fn identity_near_lipschitz() {
        let n = 1024;
        let phi: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let r = gn_bound(&phi, 0.999, 1.0, 1.0).unwrap();
        assert!((r.lhs - (1.0 - 0.5 / n as f64)).abs() < 1e-15);
        assert!(r.rhs > 1.0 && r.holds);
    }

    #[test]
    fn seminorm_matches_brute_force_and_paths_agree() {
        let phi: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64 * 0.1).collect();
        let dx = 0.02;
        let mut brute = 0.0f64;
        for i in 0..50 {
            for j in 0..50 {
                if i != j {
                    let d = ((i as f64 - j as f64).abs() * dx).powf(0.3);
                    brute = brute.max((phi[i] - phi[j]).abs() / d);
                }
            }
        }
        let s = holder_seminorm(&phi, 0.3, dx, Execution::Sequential);
        let p = holder_seminorm(&phi, 0.3, dx, Execution::Parallel);
        assert_eq!(s, p);
        assert!((s - brute).abs() <= 1e-12 * brute);
    }

    #[test]
    fn argument_ranges() {
        assert!(gn_bound(&[1.0], 1.0, 1.0, 1.0).is_err());
        assert!(gn_bound(&[1.0], 0.5, 0.5, 1.0).is_err());
        assert!(gn_bound(&vec![0.0; GN_MAX_CELLS + 1], 0.5, 1.0, 1.0).is_err());
        assert!(gn_bound(&[], 0.5, 1.0, 1.0).is_err());
    }
}
