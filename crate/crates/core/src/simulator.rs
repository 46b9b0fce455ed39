//! Seeded Euler–Maruyama simulation of the delay equation.
//!
//! The equation carries drift and diffusion on the left-hand side, so one
//! step reads
//!
//! ```text
//! x_{j+1} = x_j - drift_j dt - σ(t_j) x_{j-L_τ} ΔW_j
//! ```
//!
//! with every delay snapped to a whole number of steps. Distributed terms
//! use the trapezoid rule over the stored path.
//!
//! Increments come from a `ChaCha8Rng` seeded with the path seed. Step `j`
//! consumes exactly two `u64` words (stream words `4j..4j+4`) and maps them
//! to a standard normal by Box–Muller, so any increment can be reproduced
//! with [`noise_increment`] regardless of how far the path ran.

use std::f64::consts::TAU;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::spec::{Coefficient, EquationSpec};

/// Relative tolerance when snapping a delay to the step grid.
const SNAP_TOLERANCE: f64 = 1e-6;

/// Steps between exact recomputations of the sliding trapezoid sums.
const RESUM_INTERVAL: usize = 1024;

#[derive(Debug, Clone)]
pub struct SimParams {
    pub dt: f64,
    pub t_end: f64,
    pub n_paths: usize,
    pub base_seed: u64,
    /// Initial function on `[-h, 0]`.
    pub init: CoeffExpr,
    pub conv_eps: f64,
    /// Tail fraction of `[0, t_end]` used by [`classify`].
    pub conv_window: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 1e-3,
            t_end: 30.0,
            n_paths: 50,
            base_seed: 0,
            init: CoeffExpr::constant(1.0),
            conv_eps: 0.01,
            conv_window: 0.1,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.n_paths == 0 {
            return bad("at least one path is required".into());
        }
        if !(self.conv_eps > 0.0) {
            return bad(format!("conv_eps must be positive, got {}", self.conv_eps));
        }
        if !(self.conv_window > 0.0 && self.conv_window <= 1.0) {
            return bad(format!("conv_window must lie in (0, 1], got {}", self.conv_window));
        }
        Ok(())
    }

    /// Number of steps covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Number of steps representing `delay`.
pub fn snap_delay(delay: f64, dt: f64) -> Result<usize> {
    if delay == 0.0 {
        return Ok(0);
    }
    let steps = (delay / dt).round();
    if steps < 1.0 || ((steps * dt - delay) / delay).abs() > SNAP_TOLERANCE {
        return Err(Error::DelaySnap { delay, dt });
    }
    Ok(steps as usize)
}

/// Standard normal variate from two raw words.
#[inline]
fn box_muller(w1: u64, w2: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((w1 >> 11) + 1) as f64 * SCALE;
    let u2 = (w2 >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

#[inline]
fn next_increment(rng: &mut ChaCha8Rng, sqrt_dt: f64) -> f64 {
    let w1 = rng.next_u64();
    let w2 = rng.next_u64();
    box_muller(w1, w2) * sqrt_dt
}

/// Brownian increment of step `step` for a path seeded with `seed`.
pub fn noise_increment(seed: u64, step: u64, dt: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(4 * step as u128);
    next_increment(&mut rng, dt.sqrt())
}

/// `sign(x)|x|^α`, or a plain integer power.
#[inline]
fn signed_pow(x: f64, alpha: f64) -> f64 {
    if alpha.fract() == 0.0 && alpha.abs() <= 64.0 {
        x.powi(alpha as i32)
    } else {
        x.signum() * x.abs().powf(alpha)
    }
}

fn sample(c: &Coefficient, times: &[f64]) -> Result<Vec<f64>> {
    times.iter().map(|&t| c.at(t)).collect()
}

struct Channel {
    /// `a_k` on the grid, `None` when identically zero.
    a: Option<Vec<f64>>,
    /// `b_k` on the grid, `None` when identically zero.
    b: Option<Vec<f64>>,
    lag: usize,
}

struct Monomial {
    coeff: f64,
    lag: usize,
    power: f64,
}

/// Coefficients sampled on the step grid, shared by every path of a batch.
struct Prepared {
    n_steps: usize,
    /// Index offset of `t = 0`.
    offset: usize,
    dt: f64,
    /// `a_0` on the grid.
    a0: Option<Vec<f64>>,
    channels: Vec<Channel>,
    monomials: Vec<Monomial>,
    sigma: Option<Vec<f64>>,
    noise_lag: usize,
    history: Vec<f64>,
}

impl Prepared {
    fn new(spec: &EquationSpec, params: &SimParams) -> Result<Self> {
        params.validate()?;
        let dt = params.dt;
        let n_steps = params.n_steps();
        if spec.max_delay() >= n_steps as f64 * dt {
            return Err(Error::InvalidConfig(format!(
                "t_end {} must exceed the maximal delay {}",
                params.t_end,
                spec.max_delay()
            )));
        }
        let noise_lag = snap_delay(spec.tau(), dt)?;
        let mut offset = noise_lag;
        let mut lags = Vec::with_capacity(spec.n());
        for k in 1..=spec.n() {
            let lag = snap_delay(spec.delay(k), dt)?;
            offset = offset.max(lag);
            lags.push(lag);
        }
        let mut monomials = Vec::new();
        for term in &spec.nonlinearity().terms {
            let lag = snap_delay(term.delay, dt)?;
            offset = offset.max(lag);
            monomials.push(Monomial { coeff: term.coeff, lag, power: term.power });
        }
        let times: Vec<f64> = (0..=offset + n_steps).map(|i| (i as f64 - offset as f64) * dt).collect();
        let sampled = |c: &Coefficient| -> Result<Option<Vec<f64>>> {
            if c.is_zero() {
                Ok(None)
            } else {
                sample(c, &times).map(Some)
            }
        };
        let channels = (1..=spec.n())
            .map(|k| Ok(Channel { a: sampled(spec.a(k))?, b: sampled(spec.b(k))?, lag: lags[k - 1] }))
            .collect::<Result<Vec<_>>>()?;
        let history = times[..=offset].iter().map(|&t| params.init.eval(t)).collect::<Result<Vec<_>, _>>()?;
        Ok(Prepared {
            n_steps,
            offset,
            dt,
            a0: sampled(spec.a(0))?,
            channels,
            monomials,
            sigma: sampled(spec.sigma())?,
            noise_lag,
            history,
        })
    }

    fn run(&self, seed: u64) -> Trajectory {
        let (off, dt) = (self.offset, self.dt);
        let sqrt_dt = dt.sqrt();
        let mut x = Vec::with_capacity(off + self.n_steps + 1);
        x.extend_from_slice(&self.history);
        // y_k(m) = b_k(t_m) x(t_m) and its sliding window sums
        let mut weighted: Vec<Option<Vec<f64>>> =
            self.channels.iter().map(|c| c.b.as_ref().map(|b| x.iter().zip(b).map(|(x, b)| x * b).collect())).collect();
        let mut window: Vec<f64> = vec![0.0; self.channels.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut diverged_at = None;

        for j in 0..self.n_steps {
            let i = off + j;
            let xi = x[i];
            let mut drift = self.a0.as_ref().map_or(0.0, |a| a[i] * xi);
            for (c, (y, sum)) in self.channels.iter().zip(weighted.iter().zip(window.iter_mut())) {
                if let Some(a) = &c.a {
                    drift += a[i] * x[i - c.lag];
                }
                if let Some(y) = y {
                    if j % RESUM_INTERVAL == 0 {
                        *sum = y[i - c.lag..=i].iter().sum();
                    }
                    drift += dt * (*sum - 0.5 * (y[i - c.lag] + y[i]));
                }
            }
            for m in &self.monomials {
                drift += m.coeff * signed_pow(x[i - m.lag], m.power);
            }
            let dw = next_increment(&mut rng, sqrt_dt);
            let diffusion = self.sigma.as_ref().map_or(0.0, |s| s[i] * x[i - self.noise_lag]);
            let next = xi - drift * dt - diffusion * dw;
            x.push(next);
            if !next.is_finite() {
                diverged_at = Some(j + 1);
                break;
            }
            for (c, (y, sum)) in self.channels.iter().zip(weighted.iter_mut().zip(window.iter_mut())) {
                if let (Some(y), Some(b)) = (y, &c.b) {
                    let new = b[i + 1] * next;
                    y.push(new);
                    *sum += new - y[i - c.lag];
                }
            }
        }
        x.drain(..off);
        Trajectory { seed, dt, values: x, diverged_at }
    }
}

/// One simulated path on the grid `t_j = j dt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    pub dt: f64,
    /// Values from `t = 0`; ends at the first non-finite value if the path diverged.
    pub values: Vec<f64>,
    /// Step index of the first non-finite value.
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|j| j as f64 * self.dt)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x")?;
        for (t, x) in self.times().zip(&self.values) {
            writeln!(out, "{t},{x}")?;
        }
        Ok(())
    }
}

pub fn simulate(spec: &EquationSpec, params: &SimParams, seed: u64) -> Result<Trajectory> {
    Ok(Prepared::new(spec, params)?.run(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathClass {
    Convergent,
    NonConvergent,
    Diverged,
}

impl fmt::Display for PathClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathClass::Convergent => "convergent",
            PathClass::NonConvergent => "non_convergent",
            PathClass::Diverged => "diverged",
        })
    }
}

/// Class of a path and the largest `|x|` over its tail window.
pub fn classify(traj: &Trajectory, params: &SimParams) -> (PathClass, f64) {
    if traj.diverged_at.is_some() || traj.values.iter().any(|v| !v.is_finite()) {
        return (PathClass::Diverged, f64::INFINITY);
    }
    let last = traj.values.len() - 1;
    let span = ((params.conv_window * last as f64).round() as usize).min(last);
    let tail = traj.values[last - span..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let class = if tail < params.conv_eps { PathClass::Convergent } else { PathClass::NonConvergent };
    (class, tail)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub convergent: usize,
    pub non_convergent: usize,
    pub diverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathSummary {
    pub seed: u64,
    pub class: PathClass,
    pub max_tail_abs: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryBatch {
    pub trajectories: Vec<Trajectory>,
    pub summaries: Vec<PathSummary>,
    pub counts: ClassCounts,
}

impl TrajectoryBatch {
    pub fn convergent_fraction(&self) -> f64 {
        self.counts.convergent as f64 / self.trajectories.len() as f64
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seed,class,max_tail_abs")?;
        for s in &self.summaries {
            writeln!(out, "{},{},{}", s.seed, s.class, s.max_tail_abs)?;
        }
        Ok(())
    }

    /// Writes `path_<i>.csv` per trajectory and `summary.csv` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let width = self.trajectories.len().saturating_sub(1).to_string().len().max(3);
        for (i, traj) in self.trajectories.iter().enumerate() {
            let mut out = BufWriter::new(File::create(dir.join(format!("path_{i:0width$}.csv")))?);
            traj.write_csv(&mut out)?;
            out.flush()?;
        }
        let mut out = BufWriter::new(File::create(dir.join("summary.csv"))?);
        self.write_summary_csv(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

/// Path `i` uses seed `base_seed + i`; output order is independent of scheduling.
pub fn simulate_batch(spec: &EquationSpec, params: &SimParams) -> Result<TrajectoryBatch> {
    let prepared = Prepared::new(spec, params)?;
    let trajectories: Vec<Trajectory> =
        (0..params.n_paths as u64).into_par_iter().map(|i| prepared.run(params.base_seed.wrapping_add(i))).collect();
    let mut counts = ClassCounts::default();
    let summaries = trajectories
        .iter()
        .map(|traj| {
            let (class, max_tail_abs) = classify(traj, params);
            match class {
                PathClass::Convergent => counts.convergent += 1,
                PathClass::NonConvergent => counts.non_convergent += 1,
                PathClass::Diverged => counts.diverged += 1,
            }
            PathSummary { seed: traj.seed, class, max_tail_abs }
        })
        .collect();
    Ok(TrajectoryBatch { trajectories, summaries, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::NonlinearitySpec;

    fn params(dt: f64, t_end: f64, init: &str) -> SimParams {
        SimParams { dt, t_end, n_paths: 1, init: CoeffExpr::parse(init).unwrap(), ..Default::default() }
    }

    fn spec(delays: &[f64], a: &[&str], b: &[&str], sigma: &str, tau: f64) -> EquationSpec {
        EquationSpec::parse(delays, a, b, sigma, tau, NonlinearitySpec::default()).unwrap()
    }

    #[test]
    fn exponential_decay() {
        let s = spec(&[], &["1"], &[], "0", 0.0);
        let traj = simulate(&s, &params(1e-3, 1.0, "1"), 0).unwrap();
        assert_eq!(traj.values.len(), 1001);
        let err = (traj.values[1000] - (-1.0f64).exp()).abs();
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn zero_equation_keeps_history() {
        let s = spec(&[0.3], &["0", "0"], &["0"], "0", 0.0);
        let traj = simulate(&s, &params(1e-3, 2.0, "0.55"), 9).unwrap();
        assert!(traj.values.iter().all(|&v| v == 0.55));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = spec(&[0.5], &["0", "-2"], &["9"], "1.1^0.5", 0.0);
        let p = params(1e-3, 3.0, "0.6*cos(t)");
        assert_eq!(simulate(&s, &p, 3).unwrap(), simulate(&s, &p, 3).unwrap());
        assert_ne!(simulate(&s, &p, 3).unwrap(), simulate(&s, &p, 4).unwrap());
    }

    #[test]
    fn random_access_noise_matches_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dt: f64 = 1e-3;
        let seq: Vec<f64> = (0..100).map(|_| next_increment(&mut rng, dt.sqrt())).collect();
        for j in [0u64, 1, 17, 99] {
            assert_eq!(noise_increment(42, j, dt), seq[j as usize]);
        }
    }

    #[test]
    fn box_muller_inputs_stay_in_range() {
        assert!(box_muller(0, 0).is_finite());
        assert!(box_muller(u64::MAX, u64::MAX).is_finite());
        assert_eq!(box_muller(u64::MAX, 0), 0.0);
    }

    #[test]
    fn snapping() {
        assert_eq!(snap_delay(0.5, 1e-3).unwrap(), 500);
        assert_eq!(snap_delay(0.3, 1e-3).unwrap(), 300);
        assert_eq!(snap_delay(0.0, 1e-3).unwrap(), 0);
        assert!(snap_delay(0.5005, 1e-3).is_err());
        assert!(snap_delay(1e-5, 1e-3).is_err());
    }

    #[test]
    fn distributed_integral_of_frozen_history() {
        // x ≡ 1 on the history: the first step sees ∫ b ds = b h exactly
        let (b, h, dt) = (3.0, 0.5, 1e-3);
        let s = spec(&[h], &["0", "0"], &[&b.to_string()], "0", 0.0);
        let traj = simulate(&s, &params(dt, 1.0, "1"), 0).unwrap();
        let integral = (1.0 - traj.values[1]) / dt;
        assert!((integral - b * h).abs() < 1e-9, "{integral}");
    }

    #[test]
    fn sliding_sum_matches_direct_trapezoid() {
        // b(t) = cos t with a decaying path; compare to a reference that re-sums every step
        let s = spec(&[0.25], &["0.5", "0"], &["cos(t)"], "0", 0.0);
        let p = params(1e-3, 5.0, "1");
        let traj = simulate(&s, &p, 0).unwrap();
        let (lag, dt) = (250usize, 1e-3);
        let t_of = |m: isize| m as f64 * dt;
        let x_of = |m: isize| if m <= 0 { 1.0 } else { traj.values[m as usize] };
        let mut x = 1.0;
        for j in 0..5000isize {
            let ys: Vec<f64> = (j - lag as isize..=j).map(|m| t_of(m).cos() * x_of(m)).collect();
            let trap = dt * (ys.iter().sum::<f64>() - 0.5 * (ys[0] + ys[lag]));
            x -= (0.5 * x + trap) * dt;
            assert!((x - traj.values[j as usize + 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_variance() {
        // zero drift: x(dt) - x(0) = -σ x(-τ) ΔW
        let (sigma, dt) = (0.8, 1e-2);
        let s = spec(&[0.5], &["0", "0"], &["0"], &sigma.to_string(), 0.5);
        let p = SimParams { n_paths: 10_000, base_seed: 123, ..params(dt, 1.0, "2 + t") };
        let batch = simulate_batch(&s, &p).unwrap();
        let firsts: Vec<f64> = batch.trajectories.iter().map(|t| t.values[1]).collect();
        let mean = firsts.iter().sum::<f64>() / firsts.len() as f64;
        let var = firsts.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (firsts.len() - 1) as f64;
        let expected = sigma * sigma * 1.5f64.powi(2) * dt;
        assert!((var / expected - 1.0).abs() < 0.05, "{var} vs {expected}");
    }

    #[test]
    fn classification() {
        let p = params(1e-3, 30.0, "1");
        let zero = Trajectory { seed: 0, dt: 1e-3, values: vec![0.0; 30_001], diverged_at: None };
        assert_eq!(classify(&zero, &p).0, PathClass::Convergent);
        let blown = Trajectory { seed: 0, dt: 1e-3, values: vec![1.0, f64::INFINITY], diverged_at: Some(1) };
        assert_eq!(classify(&blown, &p).0, PathClass::Diverged);
        let decay = Trajectory {
            seed: 0,
            dt: 1e-3,
            values: (0..=30_000).map(|j| (-(j as f64) * 1e-3).exp()).collect(),
            diverged_at: None,
        };
        let (class, tail) = classify(&decay, &p);
        assert_eq!(class, PathClass::Convergent);
        assert!((tail - (-27.0f64).exp()).abs() < 1e-15);
        let flat = Trajectory { seed: 0, dt: 1e-3, values: vec![0.5; 30_001], diverged_at: None };
        assert_eq!(classify(&flat, &p).0, PathClass::NonConvergent);
    }

    #[test]
    fn divergence_is_marked() {
        let s = spec(&[], &["-1000"], &[], "0", 0.0);
        let traj = simulate(&s, &params(0.1, 100.0, "1"), 0).unwrap();
        assert!(traj.diverged_at.is_some());
        assert!(!traj.values.last().unwrap().is_finite());
    }

    #[test]
    fn validation() {
        let s = spec(&[0.5], &["0", "1"], &["0"], "0", 0.0);
        assert!(simulate(&s, &params(1e-3, 0.4, "1"), 0).is_err());
        assert!(simulate(&s, &params(0.3, 2.0, "1"), 0).is_err());
        assert!(simulate(&s, &SimParams { conv_window: 0.0, ..params(1e-3, 1.0, "1") }, 0).is_err());
    }

    #[test]
    fn signed_powers() {
        assert_eq!(signed_pow(-2.0, 2.0), 4.0);
        assert_eq!(signed_pow(-2.0, 3.0), -8.0);
        assert_eq!(signed_pow(-4.0, 1.5), -8.0);
    }
}
