use std::f64::consts::PI;

use serde::Serialize;

use super::{GammaError, GammaModel};

/// Default sampled domain for the structural-condition checks.
pub const G2_DEFAULT_XI_MAX: f64 = 100.0;
pub const G2_DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    #[serde(rename = "g1")]
    G1,
    #[serde(rename = "g2")]
    G2,
    #[serde(rename = "aL")]
    AL,
    #[serde(rename = "growth")]
    Growth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledDomain {
    pub xi_max: f64,
    pub samples: usize,
}

/// Outcome of one structural check.
///
/// `margin` is positive when the condition holds with room to spare and negative
/// when it is violated; its units are those of the quantity that decides the sign
/// (documented per check). `value` carries an auxiliary number such as a threshold
/// or a partial integral.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witness: Option<f64>,
    pub method: Method,
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampled_domain: Option<SampledDomain>,
}

impl ConditionReport {
    fn analytic(condition: Condition, pass: bool, margin: f64, witness: Option<f64>) -> Self {
        Self {
            condition,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            witness: if pass { None } else { witness },
            method: Method::Analytic,
            margin: Some(margin),
            value: None,
            sampled_domain: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serializes")
    }
}

/// `f(xi) = D (gamma + D) gamma'' + 2 gamma gamma'^2`; the structural condition asks `f <= 0`.
pub fn g2_residual(model: &GammaModel, d: f64, xi: f64) -> Result<f64, GammaError> {
    let e = model.eval(xi)?;
    Ok(d * (e.value + d) * e.d2 + 2.0 * e.value * e.d1 * e.d1)
}

fn sample_points(xi_max: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { xi_max / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| if k + 1 == n { xi_max } else { k as f64 * step })
}

fn check_args(xi_max: f64, n: usize) -> Result<(), GammaError> {
    if !(xi_max > 0.0 && xi_max.is_finite()) || n < 2 {
        return Err(GammaError::InvalidArgument(format!(
            "sampled domain needs xi_max > 0 and at least 2 samples (got {xi_max}, {n})"
        )));
    }
    Ok(())
}

/// Positivity and monotonicity of gamma.
///
/// Built-in families satisfy it by their parameter invariants (margin = `gamma(0)`).
/// Tabulated tables are sampled over `[0, max(xi_max, last knot)]`: a violation is a
/// `Fail` with witness, otherwise `Inconclusive`.
pub fn check_g1(model: &GammaModel, xi_max: f64, n: usize) -> Result<ConditionReport, GammaError> {
    model.validate()?;
    let GammaModel::Tabulated(table) = model else {
        return Ok(ConditionReport::analytic(Condition::G1, true, model.at_zero(), None));
    };
    check_args(xi_max, n)?;
    let upper = xi_max.max(*table.knots().last().expect("non-empty table"));
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for xi in sample_points(upper, n) {
        let e = model.eval_unchecked(xi);
        let slack = e.value.min(e.d1);
        if slack < worst {
            worst = slack;
        }
        if witness.is_none() && (e.value <= 0.0 || e.d1 < 0.0) {
            witness = Some(xi);
        }
    }
    let verdict = if witness.is_some() {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(ConditionReport {
        condition: Condition::G1,
        verdict,
        witness,
        method: Method::Sampled,
        margin: Some(worst),
        value: None,
        sampled_domain: Some(SampledDomain {
            xi_max: upper,
            samples: n,
        }),
    })
}

/// Structural condition on `[0, inf)`.
///
/// Built-in families are decided in closed form; tabulated tables fall back to sampling
/// on `[0, xi_max]` with `n` points.
pub fn check_g2(model: &GammaModel, d: f64, xi_max: f64, n: usize) -> Result<ConditionReport, GammaError> {
    if matches!(model, GammaModel::Tabulated(_)) {
        return check_g2_sampled(model, d, xi_max, n);
    }
    check_g2_on_domain(model, d, f64::INFINITY)
}

/// Closed-form decision of `f <= 0` on `[0, xi_max]` (`xi_max` may be infinite).
///
/// The margin is minus the maximum of the family's sign-determining factor of `f`:
/// `q(s) = -2s^2 + (2A + D)s - D(A + D)` with `s = B e^{-alpha xi}` for the saturating
/// family, `f (xi+1)^2 / B` for the logarithmic family, and
/// `2c^2 p W^2 + D c (p-1) W + D^2 (p-1)` with `W = (1+xi)^p` for the power family.
pub fn check_g2_on_domain(model: &GammaModel, d: f64, xi_max: f64) -> Result<ConditionReport, GammaError> {
    model.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(GammaError::InvalidArgument(format!("D > 0 required (got {d})")));
    }
    if !(xi_max > 0.0) {
        return Err(GammaError::InvalidArgument(format!("xi_max > 0 required (got {xi_max})")));
    }
    let report = match *model {
        GammaModel::Constant { .. } => ConditionReport::analytic(Condition::G2, true, 0.0, None),
        GammaModel::SaturatingExp { a, b, alpha } => {
            let s_lo = if xi_max.is_finite() {
                b * (-alpha * xi_max).exp()
            } else {
                0.0
            };
            let s_star = ((2.0 * a + d) / 4.0).clamp(s_lo, b);
            let q = -2.0 * s_star * s_star + (2.0 * a + d) * s_star - d * (a + d);
            let witness = (b / s_star).ln() / alpha;
            ConditionReport::analytic(Condition::G2, q <= 0.0, -q, Some(witness))
        }
        GammaModel::Logarithmic { a, b } => {
            let c0 = 2.0 * a * b - a * d - d * d;
            let c1 = b * (2.0 * b - d);
            if xi_max.is_infinite() && c1 > 0.0 {
                let witness = if c0 > 0.0 { 0.0 } else { (-c0 / c1 + 1.0).exp() - 1.0 };
                ConditionReport::analytic(Condition::G2, false, -c1, Some(witness))
            } else {
                let l_max = if xi_max.is_finite() { (xi_max + 1.0).ln() } else { 0.0 };
                let (worst, witness) = if c0 + c1 * l_max > c0 {
                    (c0 + c1 * l_max, xi_max)
                } else {
                    (c0, 0.0)
                };
                ConditionReport::analytic(Condition::G2, worst <= 0.0, -worst, Some(witness))
            }
        }
        GammaModel::Power { c, p } => {
            if p == 0.0 {
                ConditionReport::analytic(Condition::G2, true, 0.0, None)
            } else {
                let k = |w: f64| 2.0 * c * c * p * w * w + d * c * (p - 1.0) * w + d * d * (p - 1.0);
                let at_one = k(1.0);
                if xi_max.is_infinite() {
                    if at_one > 0.0 {
                        ConditionReport::analytic(Condition::G2, false, -at_one, Some(0.0))
                    } else {
                        // convex in W with positive leading coefficient: eventually positive
                        let disc = (d * c * (p - 1.0)).powi(2) - 8.0 * c * c * p * d * d * (p - 1.0);
                        let root = (-d * c * (p - 1.0) + disc.sqrt()) / (4.0 * c * c * p);
                        let w = (2.0 * root).max(1.0 + 1e-9);
                        let witness = w.powf(1.0 / p) - 1.0;
                        ConditionReport::analytic(Condition::G2, false, -2.0 * c * c * p, Some(witness))
                    }
                } else {
                    let w_max = (1.0 + xi_max).powf(p);
                    let at_max = k(w_max);
                    let (worst, witness) = if at_max > at_one { (at_max, xi_max) } else { (at_one, 0.0) };
                    ConditionReport::analytic(Condition::G2, worst <= 0.0, -worst, Some(witness))
                }
            }
        }
        GammaModel::Tabulated(_) => {
            return check_g2_sampled(
                model,
                d,
                if xi_max.is_finite() { xi_max } else { G2_DEFAULT_XI_MAX },
                G2_DEFAULT_SAMPLES,
            )
        }
    };
    Ok(report)
}

/// Evaluates `f` on `n` uniform points of `[0, xi_max]` (plus the interior stationary
/// point of the saturating family). Built-in families pass when no sample is positive;
/// tabulated tables are then `Inconclusive`.
pub fn check_g2_sampled(model: &GammaModel, d: f64, xi_max: f64, n: usize) -> Result<ConditionReport, GammaError> {
    model.validate()?;
    check_args(xi_max, n)?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(GammaError::InvalidArgument(format!("D > 0 required (got {d})")));
    }
    let extra = match *model {
        GammaModel::SaturatingExp { a, b, alpha } => {
            let xi0 = (-(1.0 / alpha) * ((2.0 * a + d) / (4.0 * b)).ln()).max(0.0);
            (xi0 <= xi_max).then_some(xi0)
        }
        _ => None,
    };
    let mut worst = f64::NEG_INFINITY;
    let mut arg = 0.0;
    for xi in sample_points(xi_max, n).chain(extra) {
        let f = g2_residual(model, d, xi)?;
        if f > worst {
            worst = f;
            arg = xi;
        }
    }
    let verdict = if worst > 0.0 {
        Verdict::Fail
    } else if matches!(model, GammaModel::Tabulated(_)) {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    Ok(ConditionReport {
        condition: Condition::G2,
        verdict,
        witness: (verdict == Verdict::Fail).then_some(arg),
        method: Method::Sampled,
        margin: Some(-worst),
        value: None,
        sampled_domain: Some(SampledDomain { xi_max, samples: n }),
    })
}

/// Whether `1/gamma` is integrable on `[0, inf)`.
///
/// `value` holds the integral when it is finite in closed form, or the partial
/// integral up to `tail_probe` otherwise. Failing reports use `tail_probe` as witness.
pub fn check_growth_integrability(model: &GammaModel, tail_probe: f64) -> Result<ConditionReport, GammaError> {
    model.validate()?;
    if !(tail_probe > 0.0 && tail_probe.is_finite()) {
        return Err(GammaError::InvalidArgument(format!(
            "tail_probe > 0 required (got {tail_probe})"
        )));
    }
    let partial = integrate_reciprocal(model, tail_probe);
    let mut report = match *model {
        GammaModel::Power { c, p } if p > 1.0 => {
            let mut r = ConditionReport::analytic(Condition::Growth, true, p - 1.0, None);
            r.value = Some(1.0 / (c * (p - 1.0)));
            return Ok(r);
        }
        GammaModel::Power { p, .. } => ConditionReport::analytic(Condition::Growth, false, p - 1.0, Some(tail_probe)),
        GammaModel::Constant { .. } | GammaModel::SaturatingExp { .. } => {
            ConditionReport::analytic(Condition::Growth, false, -1.0, Some(tail_probe))
        }
        GammaModel::Logarithmic { .. } => ConditionReport::analytic(Condition::Growth, false, -1.0, Some(tail_probe)),
        GammaModel::Tabulated(_) => ConditionReport {
            condition: Condition::Growth,
            verdict: Verdict::Inconclusive,
            witness: None,
            method: Method::Sampled,
            margin: None,
            value: None,
            sampled_domain: Some(SampledDomain {
                xi_max: tail_probe,
                samples: GROWTH_PANELS + 1,
            }),
        },
    };
    report.value = Some(partial);
    Ok(report)
}

const GROWTH_PANELS: usize = 20_000;

// Composite Simpson on a sqrt-stretched grid so long probes keep resolution near 0.
fn integrate_reciprocal(model: &GammaModel, upper: f64) -> f64 {
    let n = GROWTH_PANELS;
    let root = upper.sqrt();
    let h = root / n as f64;
    // xi = s^2, dxi = 2 s ds
    let g = |s: f64| 2.0 * s / model.value(s * s);
    let mut sum = g(0.0) + g(root);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(k as f64 * h);
    }
    sum * h / 3.0
}

/// Smallness of `a |Omega|^2` relative to `pi^2 gamma(0) / (1 + sqrt(1 + gamma(0)/D))`.
///
/// Non-strict: equality passes. Margin = threshold - `a |Omega|^2`, `value` = threshold.
pub fn check_al(a: f64, length: f64, model: &GammaModel, d: f64) -> Result<ConditionReport, GammaError> {
    model.validate()?;
    for (name, v) in [("a", a), ("length", length), ("D", d)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(GammaError::InvalidArgument(format!("{name} > 0 required (got {v})")));
        }
    }
    let g0 = model.at_zero();
    let threshold = PI * PI * g0 / (1.0 + (1.0 + g0 / d).sqrt());
    let lhs = a * length * length;
    let mut r = ConditionReport::analytic(Condition::AL, lhs <= threshold, threshold - lhs, Some(0.0));
    r.value = Some(threshold);
    Ok(r)
}

/// Choices of the weight `B` in the energy functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleB {
    /// Largest weight for which the finite-time energy estimate closes: `c1 a lambda1 / 2`
    /// with `c1 = 2 gamma(0) / (gamma(0) + D)`.
    pub b_finite_time: f64,
    /// Open interval of weights for which the functional decays exponentially.
    pub interval: (f64, f64),
    /// Midpoint of `interval`.
    pub b_chosen: f64,
}

fn positive_args(args: &[(&str, f64)]) -> Result<(), GammaError> {
    for (name, v) in args {
        if !(*v > 0.0 && v.is_finite()) {
            return Err(GammaError::InvalidArgument(format!("{name} > 0 required (got {v})")));
        }
    }
    Ok(())
}

const ETA2: f64 = 0.5;

fn eta1(d: f64, gamma0: f64) -> f64 {
    ((gamma0 + d) / d).sqrt()
}

pub fn admissible_b(a: f64, d: f64, gamma0: f64, lambda1: f64) -> Result<AdmissibleB, GammaError> {
    positive_args(&[("a", a), ("D", d), ("gamma0", gamma0), ("lambda1", lambda1)])?;
    let c1 = 2.0 * gamma0 / (gamma0 + d);
    let b_finite_time = c1 * a * lambda1 / 2.0;
    let eta1 = eta1(d, gamma0);
    let lower = 1.0 / (4.0 * eta1 * ETA2 * (1.0 - ETA2) * d);
    let upper = 2.0 * gamma0 * lambda1 / ((gamma0 + d) * a) - (2.0 + eta1) / (gamma0 + d);
    let scale = 2.0 * ETA2 * a * a;
    if upper <= lower {
        return Err(GammaError::EmptyInterval {
            lower: scale * lower,
            upper: scale * upper,
        });
    }
    let interval = (scale * lower, scale * upper);
    Ok(AdmissibleB {
        b_finite_time,
        interval,
        b_chosen: 0.5 * (interval.0 + interval.1),
    })
}

/// Constants of the exponential energy decay for a given weight `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayConstants {
    pub eta1: f64,
    pub eta2: f64,
    /// Coefficient of `int u_x^2`; positive iff `B` exceeds the interval's lower end.
    pub c1: f64,
    /// Coefficient of `int v_x^2` at the chosen `delta`; positive iff `B` is below the upper end.
    pub c2: f64,
    /// Half of the largest admissible `delta` (clamped to `[0, 1)`).
    pub delta: f64,
    /// Decay rate of the functional: `min(c1 / B, (gamma(0) + D) c2)`.
    pub c3: f64,
    /// Weight of the `int v_xx^2` dissipation term, `delta 2 gamma(0) / (gamma(0) + D)`.
    pub dissipation_weight: f64,
}

impl DecayConstants {
    pub fn is_positive(&self) -> bool {
        self.c1 > 0.0 && self.c2 > 0.0 && self.delta > 0.0
    }
}

pub fn decay_constants(a: f64, d: f64, gamma0: f64, lambda1: f64, b: f64) -> Result<DecayConstants, GammaError> {
    positive_args(&[("a", a), ("D", d), ("gamma0", gamma0), ("lambda1", lambda1), ("B", b)])?;
    let eta1 = eta1(d, gamma0);
    let c1 = 2.0 * (1.0 - ETA2) * a * b - a.powi(3) / (eta1 * d);
    let x = 2.0 * gamma0 * lambda1 / (gamma0 + d);
    let y = (2.0 + eta1) * a / (gamma0 + d) + b / (2.0 * ETA2 * a);
    let delta_max = (1.0 - y / x).min(1.0);
    let delta = (0.5 * delta_max).max(0.0);
    let c2 = (1.0 - delta) * x - y;
    let c3 = (c1 / b).min((gamma0 + d) * c2);
    Ok(DecayConstants {
        eta1,
        eta2: ETA2,
        c1,
        c2,
        delta,
        c3,
        dissipation_weight: delta * 2.0 * gamma0 / (gamma0 + d),
    })
}
