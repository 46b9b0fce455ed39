//! Parameter sweeps over the `(a, b)` plane.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms::{
    delayed_drift_spec, region_combined, region_discrete, region_distributed, region_fading_drift,
    region_fading_kernel, ScalarParams,
};
use crate::error::{Error, Result};
use crate::numerics::{QuadConfig, ScanConfig};
use crate::spec::Decomposition;
use crate::stability::verify_exponential_ms;

/// Evenly spaced axis `lo..=hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || n == 0 {
            return Err(Error::InvalidConfig(format!("invalid axis range {lo}:{hi}:{n}")));
        }
        Ok(AxisRange { lo, hi, n })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.n == 1 {
            self.lo
        } else if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * (self.hi - self.lo) / (self.n - 1) as f64
        }
    }

    /// Spacing between neighbouring points (zero for a single point).
    pub fn step(&self) -> f64 {
        if self.n > 1 {
            (self.hi - self.lo) / (self.n - 1) as f64
        } else {
            0.0
        }
    }
}

impl FromStr for AxisRange {
    type Err = Error;

    /// Parses `lo:hi:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("expected lo:hi:n, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad());
        };
        AxisRange::new(
            lo.trim().parse().map_err(|_| bad())?,
            hi.trim().parse().map_err(|_| bad())?,
            n.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionCondition {
    /// All discrete delays absorbed.
    Discrete,
    /// All distributed delays absorbed.
    Distributed,
    /// Everything absorbed.
    Combined,
    /// Fading kernel, dominant undelayed coefficient.
    FadingDrift,
    /// Fading kernel, no undelayed coefficient.
    FadingKernel,
    /// Generic evaluator on the constant equation.
    Generic(Decomposition),
}

impl RegionCondition {
    pub fn id(&self) -> String {
        match self {
            RegionCondition::Discrete => "discrete".into(),
            RegionCondition::Distributed => "distributed".into(),
            RegionCondition::Combined => "combined".into(),
            RegionCondition::FadingDrift => "fading-drift".into(),
            RegionCondition::FadingKernel => "fading-kernel".into(),
            RegionCondition::Generic(d) => format!("generic:{}:{}", d.n1, d.n2),
        }
    }

    /// Whether the condition admits the cell `pp`.
    pub fn evaluate(&self, pp: &ScalarParams, scan: ScanConfig, quad: QuadConfig) -> Result<bool> {
        Ok(match self {
            RegionCondition::Discrete => region_discrete(pp),
            RegionCondition::Distributed => region_distributed(pp),
            RegionCondition::Combined => region_combined(pp),
            RegionCondition::FadingDrift => region_fading_drift(pp),
            RegionCondition::FadingKernel => region_fading_kernel(pp),
            RegionCondition::Generic(dec) => {
                let spec = delayed_drift_spec(pp)?;
                dec.check(spec.n())?;
                verify_exponential_ms(&spec, *dec, scan, quad)?.lambda.is_some()
            }
        })
    }
}

impl fmt::Display for RegionCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for RegionCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "discrete" => RegionCondition::Discrete,
            "distributed" => RegionCondition::Distributed,
            "combined" => RegionCondition::Combined,
            "fading-drift" => RegionCondition::FadingDrift,
            "fading-kernel" => RegionCondition::FadingKernel,
            _ => {
                let bad = || Error::InvalidConfig(format!("unknown condition {s:?}"));
                let rest = s.strip_prefix("generic:").ok_or_else(bad)?;
                let (n1, n2) = rest.split_once(':').ok_or_else(bad)?;
                RegionCondition::Generic(Decomposition {
                    n1: n1.parse().map_err(|_| bad())?,
                    n2: n2.parse().map_err(|_| bad())?,
                })
            }
        })
    }
}

/// Parses a comma-separated condition list.
pub fn parse_conditions(list: &str) -> Result<Vec<RegionCondition>> {
    let conds = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>>>()?;
    if conds.is_empty() {
        return Err(Error::InvalidConfig("no conditions given".into()));
    }
    Ok(conds)
}

/// Masks of each condition over an `(a, b)` grid. Cell `(ia, ib)` sits at
/// flat index `ib * a_range.n + ia`.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub a_range: AxisRange,
    pub b_range: AxisRange,
    /// Shared parameters; `a` and `b` are overwritten per cell.
    pub fixed: ScalarParams,
    pub conditions: Vec<RegionCondition>,
    pub masks: Vec<Vec<bool>>,
    /// Cells per condition whose evaluation failed and were recorded false.
    pub error_counts: Vec<usize>,
}

impl RegionGrid {
    pub fn get(&self, condition: usize, ia: usize, ib: usize) -> bool {
        self.masks[condition][ib * self.a_range.n + ia]
    }

    pub fn mask(&self, condition: RegionCondition) -> Option<&[bool]> {
        self.conditions.iter().position(|c| *c == condition).map(|i| self.masks[i].as_slice())
    }

    pub fn cell(&self, index: usize) -> (f64, f64) {
        let n = self.a_range.n;
        (self.a_range.value(index % n), self.b_range.value(index / n))
    }

    /// Writes `a,b,<ids>` rows, `b`-major.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let ids: Vec<String> = self.conditions.iter().map(RegionCondition::id).collect();
        writeln!(out, "a,b,{}", ids.join(","))?;
        for index in 0..self.a_range.n * self.b_range.n {
            let (a, b) = self.cell(index);
            write!(out, "{a},{b}")?;
            for mask in &self.masks {
                write!(out, ",{}", u8::from(mask[index]))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn map_region(
    a_range: AxisRange,
    b_range: AxisRange,
    fixed: ScalarParams,
    conditions: &[RegionCondition],
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<RegionGrid> {
    fixed.validate()?;
    let cells = a_range.n * b_range.n;
    let results: Vec<Vec<Option<bool>>> = (0..cells)
        .into_par_iter()
        .map(|index| {
            let pp = ScalarParams { a: a_range.value(index % a_range.n), b: b_range.value(index / a_range.n), ..fixed };
            conditions.iter().map(|c| c.evaluate(&pp, scan, quad).ok()).collect()
        })
        .collect();
    let mut masks = vec![Vec::with_capacity(cells); conditions.len()];
    let mut error_counts = vec![0; conditions.len()];
    for row in results {
        for (ci, value) in row.into_iter().enumerate() {
            masks[ci].push(value.unwrap_or(false));
            error_counts[ci] += usize::from(value.is_none());
        }
    }
    Ok(RegionGrid { a_range, b_range, fixed, conditions: conditions.to_vec(), masks, error_counts })
}

pub fn export_region(grid: &RegionGrid, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    grid.write_csv(&mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionManifest {
    pub a_range: AxisRange,
    pub b_range: AxisRange,
    pub fixed: ScalarParams,
    pub conditions: Vec<String>,
    pub error_counts: Vec<usize>,
    pub region_file: String,
    pub boundary_file: Option<String>,
}

impl RegionManifest {
    pub fn new(grid: &RegionGrid, region_file: &str, boundary_file: Option<&str>) -> Self {
        RegionManifest {
            a_range: grid.a_range,
            b_range: grid.b_range,
            fixed: grid.fixed,
            conditions: grid.conditions.iter().map(RegionCondition::id).collect(),
            error_counts: grid.error_counts.clone(),
            region_file: region_file.into(),
            boundary_file: boundary_file.map(Into::into),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: QuadConfig = QuadConfig { panels: 64 };

    fn scan() -> ScanConfig {
        ScanConfig::for_max_delay(0.5)
    }

    fn point(v: f64) -> AxisRange {
        AxisRange::new(v, v, 1).unwrap()
    }

    fn single(a: f64, b: f64, p: f64, cond: RegionCondition) -> bool {
        let grid = map_region(point(a), point(b), ScalarParams::new(0.0, 0.0, 0.5, p), &[cond], scan(), Q).unwrap();
        grid.masks[0][0]
    }

    #[test]
    fn axis_parsing() {
        let r: AxisRange = "-4:8:200".parse().unwrap();
        assert_eq!((r.lo, r.hi, r.n), (-4.0, 8.0, 200));
        assert_eq!(r.value(0), -4.0);
        assert_eq!(r.value(199), 8.0);
        assert!("1:2".parse::<AxisRange>().is_err());
        assert!("2:1:5".parse::<AxisRange>().is_err());
        assert!("0:1:0".parse::<AxisRange>().is_err());
    }

    #[test]
    fn condition_ids_round_trip() {
        for id in ["discrete", "distributed", "combined", "fading-drift", "fading-kernel", "generic:1:0"] {
            assert_eq!(id.parse::<RegionCondition>().unwrap().id(), id);
        }
        assert!("4_6".parse::<RegionCondition>().is_err());
        assert!("generic:1".parse::<RegionCondition>().is_err());
        assert_eq!(parse_conditions("discrete, combined").unwrap().len(), 2);
    }

    #[test]
    fn cell_examples() {
        assert!(single(1.0, 0.0, 0.2, RegionCondition::Discrete));
        assert!(single(-2.0, 9.0, 0.55, RegionCondition::Combined));
        assert!(!single(0.0, 0.0, 0.2, RegionCondition::Distributed));
        assert!(single(-2.0, 9.0, 0.55, RegionCondition::Generic(Decomposition { n1: 1, n2: 1 })));
    }

    #[test]
    fn invalid_generic_decomposition_is_counted() {
        let cond = RegionCondition::Generic(Decomposition { n1: 2, n2: 0 });
        let grid =
            map_region(point(1.0), point(1.0), ScalarParams::new(0.0, 0.0, 0.5, 0.2), &[cond], scan(), Q).unwrap();
        assert_eq!((grid.masks[0][0], grid.error_counts[0]), (false, 1));
    }

    #[test]
    fn csv_layout() {
        let grid = map_region(
            AxisRange::new(0.0, 1.0, 2).unwrap(),
            AxisRange::new(0.0, 2.0, 3).unwrap(),
            ScalarParams::new(0.0, 0.0, 0.5, 0.2),
            &[RegionCondition::Discrete, RegionCondition::Combined],
            scan(),
            Q,
        )
        .unwrap();
        let mut out = Vec::new();
        grid.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "a,b,discrete,combined");
        assert!(lines[1].starts_with("0,0,") && lines[2].starts_with("1,0,") && lines[3].starts_with("0,1,"));
    }
}
