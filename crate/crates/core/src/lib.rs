//! Stability analysis and simulation of scalar stochastic delay equations
//! with discrete and distributed delays and time-varying coefficients.
//!
//! * [`stability`] evaluates the Lyapunov-type test for every decomposition
//!   of the delayed terms and reports certificates.
//! * [`closed_forms`] holds printed special cases and the scalar regions.
//! * [`boundary`] samples the exact deterministic stability boundary.
//! * [`simulator`] runs seeded Euler–Maruyama Monte Carlo batches.
//! * [`region`] sweeps conditions over an `(a, b)` grid.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod closed_forms;
pub mod error;
pub mod expr;
pub mod numerics;
pub mod presets;
pub mod region;
pub mod simulator;
pub mod spec;
pub mod specfile;
pub mod stability;

pub use error::{Error, Result};
pub use expr::{CoeffExpr, ExprError};
pub use numerics::{QuadConfig, ScanConfig};
pub use spec::{Coefficient, Decomposition, EquationSpec, NonlinearTerm, NonlinearitySpec};
pub use stability::{analyze, multi_condition, MultiConditionReport, StabilityVerdict};
