//! Temperature-dependent coefficient `gamma(theta)` and its structural conditions.
//!
//! The same function multiplies both the Kelvin-Voigt viscosity and the elastic
//! modulus. Built-in families have closed-form derivatives; tabulated data is
//! interpolated by a clamped cubic spline so that the second derivative needed by
//! the structural condition is available.

mod conditions;
mod table;

use serde::Serialize;
use thiserror::Error;

pub use conditions::{
    admissible_b, check_al, check_g1, check_g2, check_g2_on_domain, check_g2_sampled, check_growth_integrability,
    decay_constants, g2_residual, AdmissibleB, Condition, ConditionReport, DecayConstants, Method, SampledDomain, Verdict,
    G2_DEFAULT_SAMPLES, G2_DEFAULT_XI_MAX,
};
pub use table::CubicTable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error("invalid {family} parameters: {reason}")]
    InvalidParameter { family: &'static str, reason: String },
    #[error("gamma is defined on [0, inf); got xi = {0}")]
    NegativeArgument(f64),
    #[error("admissible B interval is empty (lower {lower}, upper {upper}); the decay condition fails")]
    EmptyInterval { lower: f64, upper: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Value and first two derivatives of gamma at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaEval {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GammaModel {
    /// `gamma = c`
    Constant {
        c: f64,
    },
    /// `gamma = A - B exp(-alpha xi)` with `0 < B < A`.
    SaturatingExp {
        a: f64,
        b: f64,
        alpha: f64,
    },
    /// `gamma = A + B ln(xi + 1)`
    Logarithmic {
        a: f64,
        b: f64,
    },
    /// `gamma = c (1 + xi)^p`; superlinear and integrable in `1/gamma` for `p > 1`.
    Power {
        c: f64,
        p: f64,
    },
    Tabulated(CubicTable),
}

fn positive(family: &'static str, name: &str, v: f64) -> Result<(), GammaError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(GammaError::InvalidParameter {
            family,
            reason: format!("{name} > 0 required (got {v})"),
        })
    }
}

impl GammaModel {
    pub fn constant(c: f64) -> Result<Self, GammaError> {
        let m = GammaModel::Constant { c };
        m.validate()?;
        Ok(m)
    }

    pub fn saturating_exp(a: f64, b: f64, alpha: f64) -> Result<Self, GammaError> {
        let m = GammaModel::SaturatingExp { a, b, alpha };
        m.validate()?;
        Ok(m)
    }

    pub fn logarithmic(a: f64, b: f64) -> Result<Self, GammaError> {
        let m = GammaModel::Logarithmic { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn power(c: f64, p: f64) -> Result<Self, GammaError> {
        let m = GammaModel::Power { c, p };
        m.validate()?;
        Ok(m)
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self, GammaError> {
        Ok(GammaModel::Tabulated(CubicTable::new(xs, values)?))
    }

    pub fn family(&self) -> &'static str {
        match self {
            GammaModel::Constant { .. } => "constant",
            GammaModel::SaturatingExp { .. } => "saturating_exp",
            GammaModel::Logarithmic { .. } => "logarithmic",
            GammaModel::Power { .. } => "power",
            GammaModel::Tabulated(_) => "tabulated",
        }
    }

    pub fn validate(&self) -> Result<(), GammaError> {
        match *self {
            GammaModel::Constant { c } => positive("constant", "c", c),
            GammaModel::SaturatingExp { a, b, alpha } => {
                positive("saturating_exp", "A", a)?;
                positive("saturating_exp", "B", b)?;
                positive("saturating_exp", "alpha", alpha)?;
                if b >= a {
                    return Err(GammaError::InvalidParameter {
                        family: "saturating_exp",
                        reason: format!("B < A required (A = {a}, B = {b})"),
                    });
                }
                Ok(())
            }
            GammaModel::Logarithmic { a, b } => {
                positive("logarithmic", "A", a)?;
                positive("logarithmic", "B", b)
            }
            GammaModel::Power { c, p } => {
                positive("power", "c", c)?;
                if !(p.is_finite() && p >= 0.0) {
                    return Err(GammaError::InvalidParameter {
                        family: "power",
                        reason: format!("p >= 0 required (got {p})"),
                    });
                }
                Ok(())
            }
            // construction already checked the knots
            GammaModel::Tabulated(_) => Ok(()),
        }
    }

    /// Value and derivatives at `xi >= 0`.
    pub fn eval(&self, xi: f64) -> Result<GammaEval, GammaError> {
        if !(xi >= 0.0) {
            return Err(GammaError::NegativeArgument(xi));
        }
        Ok(self.eval_unchecked(xi))
    }

    pub(crate) fn eval_unchecked(&self, xi: f64) -> GammaEval {
        match *self {
            GammaModel::Constant { c } => GammaEval {
                value: c,
                d1: 0.0,
                d2: 0.0,
            },
            GammaModel::SaturatingExp { a, b, alpha } => {
                let s = b * (-alpha * xi).exp();
                GammaEval {
                    value: a - s,
                    d1: alpha * s,
                    d2: -alpha * alpha * s,
                }
            }
            GammaModel::Logarithmic { a, b } => {
                let w = xi + 1.0;
                GammaEval {
                    value: a + b * w.ln(),
                    d1: b / w,
                    d2: -b / (w * w),
                }
            }
            GammaModel::Power { c, p } => {
                let w = 1.0 + xi;
                let wp = w.powf(p);
                GammaEval {
                    value: c * wp,
                    d1: c * p * wp / w,
                    d2: c * p * (p - 1.0) * wp / (w * w),
                }
            }
            GammaModel::Tabulated(ref t) => {
                let (value, d1, d2) = t.eval(xi);
                GammaEval { value, d1, d2 }
            }
        }
    }

    /// `gamma(xi)` only; used in the solver's inner loops where `xi >= 0` is maintained.
    #[inline]
    pub(crate) fn value(&self, xi: f64) -> f64 {
        match *self {
            GammaModel::Constant { c } => c,
            GammaModel::SaturatingExp { a, b, alpha } => a - b * (-alpha * xi).exp(),
            GammaModel::Logarithmic { a, b } => a + b * (xi + 1.0).ln(),
            GammaModel::Power { c, p } => {
                if p == 2.0 {
                    c * (1.0 + xi) * (1.0 + xi)
                } else {
                    c * (1.0 + xi).powf(p)
                }
            }
            GammaModel::Tabulated(ref t) => t.eval(xi).0,
        }
    }

    pub fn at_zero(&self) -> f64 {
        self.value(0.0)
    }

    /// Key/value pairs in the config-file vocabulary (`gamma.*` keys without the prefix).
    pub fn config_entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("family", format!("\"{}\"", self.family()))];
        match self {
            GammaModel::Constant { c } => out.push(("c", fmt_f64(*c))),
            GammaModel::SaturatingExp { a, b, alpha } => {
                out.push(("A", fmt_f64(*a)));
                out.push(("B", fmt_f64(*b)));
                out.push(("alpha", fmt_f64(*alpha)));
            }
            GammaModel::Logarithmic { a, b } => {
                out.push(("A", fmt_f64(*a)));
                out.push(("B", fmt_f64(*b)));
            }
            GammaModel::Power { c, p } => {
                out.push(("c", fmt_f64(*c)));
                out.push(("p", fmt_f64(*p)));
            }
            GammaModel::Tabulated(t) => {
                out.push(("xi", fmt_list(t.knots())));
                out.push(("values", fmt_list(t.values())));
            }
        }
        out
    }
}

/// Shortest decimal that round-trips through `str::parse::<f64>`.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn fmt_list(vs: &[f64]) -> String {
    let items: Vec<String> = vs.iter().map(|v| fmt_f64(*v)).collect();
    format!("[{}]", items.join(", "))
}
