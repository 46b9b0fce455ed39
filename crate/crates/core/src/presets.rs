//! Parameter sets of the three reference Monte Carlo experiments.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::closed_forms::{delayed_drift_spec, fading_kernel_spec, ScalarParams};
use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::simulator::SimParams;
use crate::spec::EquationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Constant delayed drift at the point `(a, b) = (-2, 9)`.
    Fig4,
    /// Fading kernel with a positive undelayed coefficient.
    Fig5,
    /// Fading kernel without an undelayed coefficient.
    Fig6,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig4, Preset::Fig5, Preset::Fig6];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
        }
    }

    pub fn params(self) -> ScalarParams {
        match self {
            Preset::Fig4 => ScalarParams { a: -2.0, b: 9.0, c: 1.0, h: 0.5, p: 0.55, tau: 0.0, mu: 0.0, nu: 0.0 },
            Preset::Fig5 => ScalarParams { a: 3.0, b: 4.0, c: 3.0, h: 0.5, p: 0.5, tau: 0.0, mu: 0.1, nu: 0.01 },
            Preset::Fig6 => ScalarParams { a: 0.0, b: 8.5, c: 1.0, h: 0.3, p: 0.2, tau: 0.0, mu: 0.008, nu: 0.15 },
        }
    }

    /// Initial function on `[-h, 0]`.
    pub fn init_text(self) -> &'static str {
        match self {
            Preset::Fig4 => "0.6*cos(t)",
            Preset::Fig5 => "-0.09*cos(t)",
            Preset::Fig6 => "0.55",
        }
    }

    pub fn spec(self) -> Result<EquationSpec> {
        match self {
            Preset::Fig4 => delayed_drift_spec(&self.params()),
            Preset::Fig5 | Preset::Fig6 => fading_kernel_spec(&self.params()),
        }
    }

    /// Default simulation settings with this preset's initial function.
    pub fn sim_params(self) -> SimParams {
        SimParams { init: CoeffExpr::parse(self.init_text()).expect("preset init parses"), ..SimParams::default() }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset {s:?}, expected fig4, fig5 or fig6")))
    }
}
