//! TOML equation files.
//!
//! ```toml
//! delays = [0.5]
//! a = [0, -2]            # a_0 .. a_n, numbers or expressions in t
//! b = ["9*exp(-0.1*t)"]  # b_1 .. b_n
//! sigma = "1.1^0.5"
//! tau = 0.0
//!
//! [[nonlinearity]]
//! coeff = 1.0
//! delay = 0.5
//! power = 2.0
//!
//! [scan]
//! t_max = 50.0
//! grid = 2001
//! refine = 32
//!
//! [quadrature]
//! panels = 64
//!
//! [simulation]
//! dt = 1e-3
//! t_end = 30.0
//! paths = 50
//! seed = 0
//! init = "0.6*cos(t)"
//! conv_eps = 0.01
//! conv_window = 0.1
//! ```
//!
//! Every section is optional; omitted values take the library defaults.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::numerics::{QuadConfig, ScanConfig};
use crate::simulator::SimParams;
use crate::spec::{EquationSpec, NonlinearTerm, NonlinearitySpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Value {
    Number(f64),
    Text(String),
}

impl Value {
    fn to_expr(&self, field: &str) -> Result<CoeffExpr> {
        match self {
            Value::Number(v) => Ok(CoeffExpr::constant(*v)),
            Value::Text(s) => CoeffExpr::parse(s).map_err(|e| Error::SpecFile(format!("{field}: {e}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    delay: f64,
    power: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    t_max: Option<f64>,
    grid: Option<usize>,
    refine: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    panels: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    dt: Option<f64>,
    t_end: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
    init: Option<Value>,
    conv_eps: Option<f64>,
    conv_window: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: Option<usize>,
    #[serde(default)]
    delays: Vec<f64>,
    a: Vec<Value>,
    #[serde(default)]
    b: Vec<Value>,
    sigma: Option<Value>,
    #[serde(default)]
    tau: f64,
    #[serde(default)]
    nonlinearity: Vec<RawTerm>,
    #[serde(default)]
    scan: RawScan,
    #[serde(default)]
    quadrature: RawQuadrature,
    #[serde(default)]
    simulation: RawSimulation,
}

/// Optional overrides of the scan, quadrature and simulation settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub t_max: Option<f64>,
    pub grid: Option<usize>,
    pub refine: Option<usize>,
    pub panels: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub init: Option<CoeffExpr>,
    pub conv_eps: Option<f64>,
    pub conv_window: Option<f64>,
}

impl Overrides {
    /// `self` where set, otherwise `base`.
    pub fn or(self, base: Overrides) -> Overrides {
        Overrides {
            t_max: self.t_max.or(base.t_max),
            grid: self.grid.or(base.grid),
            refine: self.refine.or(base.refine),
            panels: self.panels.or(base.panels),
            dt: self.dt.or(base.dt),
            t_end: self.t_end.or(base.t_end),
            paths: self.paths.or(base.paths),
            seed: self.seed.or(base.seed),
            init: self.init.or(base.init),
            conv_eps: self.conv_eps.or(base.conv_eps),
            conv_window: self.conv_window.or(base.conv_window),
        }
    }

    pub fn scan(&self, max_delay: f64) -> Result<ScanConfig> {
        let d = ScanConfig::for_max_delay(max_delay);
        let scan = ScanConfig {
            t_max: self.t_max.unwrap_or(d.t_max),
            n_grid: self.grid.unwrap_or(d.n_grid),
            refine_factor: self.refine.unwrap_or(d.refine_factor),
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn quad(&self) -> Result<QuadConfig> {
        QuadConfig::new(self.panels.unwrap_or(QuadConfig::default().panels))
    }

    /// Simulation settings on top of `base`.
    pub fn sim(&self, base: SimParams) -> Result<SimParams> {
        let p = SimParams {
            dt: self.dt.unwrap_or(base.dt),
            t_end: self.t_end.unwrap_or(base.t_end),
            n_paths: self.paths.unwrap_or(base.n_paths),
            base_seed: self.seed.unwrap_or(base.base_seed),
            init: self.init.clone().unwrap_or(base.init),
            conv_eps: self.conv_eps.unwrap_or(base.conv_eps),
            conv_window: self.conv_window.unwrap_or(base.conv_window),
        };
        p.validate()?;
        Ok(p)
    }
}

/// A parsed equation file.
#[derive(Debug, Clone)]
pub struct SpecFile {
    pub spec: EquationSpec,
    pub settings: Overrides,
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawSpec = toml::from_str(text).map_err(|e| Error::SpecFile(e.to_string()))?;
        if let Some(n) = raw.n {
            if n != raw.delays.len() {
                return Err(Error::SpecFile(format!("n = {n} but {} delays are listed", raw.delays.len())));
            }
        }
        let exprs = |name: &str, vs: &[Value]| -> Result<Vec<CoeffExpr>> {
            vs.iter().enumerate().map(|(i, v)| v.to_expr(&format!("{name}[{i}]"))).collect()
        };
        let sigma = match &raw.sigma {
            Some(v) => v.to_expr("sigma")?,
            None => CoeffExpr::constant(0.0),
        };
        let terms = raw.nonlinearity.iter().map(|t| NonlinearTerm { coeff: t.coeff, delay: t.delay, power: t.power });
        let spec = EquationSpec::new(
            raw.delays.clone(),
            exprs("a", &raw.a)?,
            exprs("b", &raw.b)?,
            sigma,
            raw.tau,
            NonlinearitySpec::new(terms.collect())?,
        )?;
        let sim = &raw.simulation;
        let settings = Overrides {
            t_max: raw.scan.t_max,
            grid: raw.scan.grid,
            refine: raw.scan.refine,
            panels: raw.quadrature.panels,
            dt: sim.dt,
            t_end: sim.t_end,
            paths: sim.paths,
            seed: sim.seed,
            init: sim.init.as_ref().map(|v| v.to_expr("simulation.init")).transpose()?,
            conv_eps: sim.conv_eps,
            conv_window: sim.conv_window,
        };
        Ok(SpecFile { spec, settings })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SpecFile(format!("cannot read {}: {e}", path.display())))?;
        SpecFile::parse(&text).map_err(|e| match e {
            Error::SpecFile(msg) => Error::SpecFile(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
