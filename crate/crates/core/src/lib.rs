//! Interference analysis for secondary users sharing the DME band.
//!
//! The crate models a Poisson field of secondary users around a DME ground
//! transponder or an airborne interrogator, computes the cumulants of the
//! aggregate interference they cause, fits closed-form distributions to
//! those cumulants, checks them by Monte Carlo, and solves for the
//! operating parameters that keep the incumbent protected.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod montecarlo;
pub mod propagation;
pub mod quadrature;
pub mod scenario;
pub mod solver;
pub mod special;
pub mod summation;
pub mod units;

pub use error::{Error, NumericError, Result, SolverError, ValidationError, Violation};
pub use scenario::{AirborneScenario, Scenario, ScenarioKind, TransponderScenario};
pub use units::PowerDbm;
