//! Numerical laboratory for one-dimensional quasilinear thermoviscoelasticity.
//!
//! The model couples a Kelvin-Voigt wave equation to a heat equation through a
//! temperature-dependent coefficient `gamma(theta)`:
//!
//! ```text
//! u_tt    = (gamma(theta) u_xt)_x + a (gamma(theta) u_x)_x
//! theta_t = D theta_xx + gamma(theta) u_xt^2
//! ```
//!
//! on an interval with homogeneous Neumann conditions. The solver integrates the
//! equivalent system for `v = u_t + a u`, in which the mechanical part becomes a
//! parabolic equation for `v` plus an ODE for `u`.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod experiments;
pub mod functionals;
pub mod gamma;
pub mod linalg;
pub mod par;
pub mod solver;

pub use gamma::{ConditionReport, GammaError, GammaEval, GammaModel, Verdict};
