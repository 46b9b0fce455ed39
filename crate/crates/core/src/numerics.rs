//! Composite Simpson quadrature and grid scans for sup/inf over `t >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Composite Simpson settings: number of panels per integration interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { panels: 64 }
    }
}

impl QuadConfig {
    pub fn new(panels: usize) -> Result<Self> {
        let q = QuadConfig { panels };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels < 2 || !self.panels.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!("quadrature panels must be even and >= 2, got {}", self.panels)));
        }
        Ok(())
    }
}

/// Finite-horizon stand-in for `sup_{t>=0}` / `inf_{t>=0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub t_max: f64,
    pub n_grid: usize,
    pub refine_factor: usize,
}

impl ScanConfig {
    /// Defaults scaled to the longest delay: horizon `50 * max(delay, 1)`.
    pub fn for_max_delay(max_delay: f64) -> Self {
        ScanConfig { t_max: 50.0 * max_delay.max(1.0), n_grid: 2001, refine_factor: 32 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("scan t_max must be positive, got {}", self.t_max)));
        }
        if self.n_grid < 2 {
            return Err(Error::InvalidConfig(format!("scan grid needs >= 2 points, got {}", self.n_grid)));
        }
        if self.refine_factor == 0 {
            return Err(Error::InvalidConfig("scan refine factor must be positive".into()));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        self.t_max / (self.n_grid - 1) as f64
    }

    fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n_grid {
            self.t_max
        } else {
            i as f64 * self.step()
        }
    }
}

/// Location and value of a scanned extremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub value: f64,
}

/// Composite Simpson rule on `[lo, hi]` with `q.panels` panels.
pub fn integrate<F>(mut f: F, lo: f64, hi: f64, q: QuadConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if hi == lo {
        return Ok(0.0);
    }
    let n = q.panels;
    let step = (hi - lo) / n as f64;
    let mut sum = f(lo)? + f(hi)?;
    for i in 1..n {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(lo + i as f64 * step)?;
    }
    Ok(sum * step / 3.0)
}

/// `∫ |g(x)| dx` over `[lo, hi]`.
///
/// Same Simpson panels as [`integrate`], except that every panel pair in
/// which `g` changes sign is split at the root, so kernels that are
/// piecewise polynomial of degree <= 3 integrate exactly.
pub fn integrate_abs<G>(g: G, lo: f64, hi: f64, q: QuadConfig) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    integrate_abs_weighted(g, |_| Ok(1.0), lo, hi, q)
}

/// `∫ w(x) |g(x)| dx` over `[lo, hi]`, splitting at sign changes of `g`.
pub fn integrate_abs_weighted<G, W>(mut g: G, mut w: W, lo: f64, hi: f64, q: QuadConfig) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
    W: FnMut(f64) -> Result<f64>,
{
    if hi == lo {
        return Ok(0.0);
    }
    let n = q.panels;
    let step = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * step }).collect();
    let mut gs = Vec::with_capacity(n + 1);
    for &x in &xs {
        gs.push(g(x)?);
    }

    let mut total = 0.0;
    for pair in 0..n / 2 {
        let i = 2 * pair;
        let (x0, x1, x2) = (xs[i], xs[i + 1], xs[i + 2]);
        let (g0, g1, g2) = (gs[i], gs[i + 1], gs[i + 2]);
        let crosses = |a: f64, b: f64| (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0);
        let kink_at_mid = g1 == 0.0 && crosses(g0, g2);
        if !crosses(g0, g1) && !crosses(g1, g2) && !kink_at_mid {
            let (w0, w1, w2) = (w(x0)?, w(x1)?, w(x2)?);
            total += (x2 - x0) / 6.0 * (w0 * g0.abs() + 4.0 * w1 * g1.abs() + w2 * g2.abs());
            continue;
        }
        let mut cuts = vec![x0];
        if crosses(g0, g1) {
            cuts.push(bisect_root(&mut g, x0, x1, g0)?);
        }
        cuts.push(x1);
        if crosses(g1, g2) {
            cuts.push(bisect_root(&mut g, x1, x2, g1)?);
        }
        cuts.push(x2);
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let m = 0.5 * (a + b);
            let fa = w(a)? * g(a)?.abs();
            let fm = w(m)? * g(m)?.abs();
            let fb = w(b)? * g(b)?.abs();
            total += (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        }
    }
    Ok(total)
}

fn bisect_root<G>(g: &mut G, mut a: f64, mut b: f64, ga: f64) -> Result<f64>
where
    G: FnMut(f64) -> Result<f64>,
{
    let negative_left = ga < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == negative_left {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximum of `f` over `[0, t_max]`: grid maximum, then one refinement pass
/// of `refine_factor` subsamples in each neighbouring cell.
pub fn sup_scan<F>(f: F, cfg: ScanConfig) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    match sup_scan_bounded(f, cfg, f64::INFINITY)? {
        Scan::Complete(e) => Ok(e),
        Scan::Exceeded(_) => unreachable!("no value exceeds +inf"),
    }
}

/// Minimum of `f` over `[0, t_max]`; the sup scan of `-f`.
pub fn inf_scan<F>(mut f: F, cfg: ScanConfig) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let e = sup_scan(|t| f(t).map(|v| -v), cfg)?;
    Ok(Extremum { t: e.t, value: -e.value })
}

/// Result of a scan that may stop early.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scan {
    /// Full scan; the refined maximum.
    Complete(Extremum),
    /// First sampled point whose value exceeded the ceiling.
    Exceeded(Extremum),
}

/// Like [`sup_scan`], but stops at the first sample strictly above `ceiling`.
pub fn sup_scan_bounded<F>(mut f: F, cfg: ScanConfig, ceiling: f64) -> Result<Scan>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    let mut best = Extremum { t: 0.0, value: f64::NEG_INFINITY };
    let mut best_idx = 0;
    for i in 0..cfg.n_grid {
        let t = cfg.node(i);
        let v = f(t)?;
        if v > ceiling {
            return Ok(Scan::Exceeded(Extremum { t, value: v }));
        }
        if v > best.value {
            best = Extremum { t, value: v };
            best_idx = i;
        }
    }
    let lo = cfg.node(best_idx.saturating_sub(1));
    let hi = cfg.node((best_idx + 1).min(cfg.n_grid - 1));
    let centre = cfg.node(best_idx);
    for (a, b) in [(lo, centre), (centre, hi)] {
        if b <= a {
            continue;
        }
        let sub = (b - a) / cfg.refine_factor as f64;
        for j in 1..cfg.refine_factor {
            let t = a + j as f64 * sub;
            let v = f(t)?;
            if v > ceiling {
                return Ok(Scan::Exceeded(Extremum { t, value: v }));
            }
            if v > best.value {
                best = Extremum { t, value: v };
            }
        }
    }
    Ok(Scan::Complete(best))
}
