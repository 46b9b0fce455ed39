//! Lyapunov-functional stability test for a chosen decomposition `(n1, n2)`.
//!
//! For a decomposition the equation is rewritten with the stabilizing
//! coefficient
//!
//! ```text
//! S(t) = Σ_{k=0..n1} a_k(t+h_k) + Σ_{k=1..n2} b_k(t) h_k
//! ```
//!
//! and the kernels `R_k(t,s)` of the neutral term. The test function
//! `F(t, λ)` collects every remaining term; `sup_t F(t, λ) <= 0` for some
//! `λ > 0` (together with `inf S > 0`, `sup R < 1`) certifies exponential
//! mean square stability of the linear part, and a strictly negative
//! margin leaves room `ε` for the nonlinearity.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{self, integrate, integrate_abs, integrate_abs_weighted, Extremum, QuadConfig, Scan, ScanConfig};
use crate::spec::{in_range, Decomposition, EquationSpec};

/// Number of geometric steps in the λ search.
pub const LAMBDA_STEPS: usize = 40;

/// Evaluator for the test quantities of one decomposition.
#[derive(Debug, Clone, Copy)]
pub struct Terms<'a> {
    spec: &'a EquationSpec,
    dec: Decomposition,
    quad: QuadConfig,
}

impl<'a> Terms<'a> {
    pub fn new(spec: &'a EquationSpec, dec: Decomposition, quad: QuadConfig) -> Result<Self> {
        dec.check(spec.n())?;
        quad.validate()?;
        Ok(Terms { spec, dec, quad })
    }

    pub fn spec(&self) -> &'a EquationSpec {
        self.spec
    }

    pub fn decomposition(&self) -> Decomposition {
        self.dec
    }

    /// Stabilizing coefficient `S(t)`.
    pub fn s(&self, t: f64) -> Result<f64> {
        let spec = self.spec;
        let mut total = 0.0;
        for k in 0..=self.dec.n1 {
            total += spec.a(k).at(t + spec.delay(k))?;
        }
        for k in 1..=self.dec.n2 {
            total += spec.b(k).at(t)? * spec.delay(k);
        }
        Ok(total)
    }

    /// Kernel `R_k(t, s)` for `k` in `1..=m2`, `s ∈ [t - h_k, t]`.
    pub fn kernel(&self, k: usize, t: f64, s: f64) -> Result<f64> {
        let (m1, m2) = (self.dec.m1(), self.dec.m2());
        if !in_range(k, 1, m2) {
            return Err(Error::ChannelIndex { k, max: m2 });
        }
        let spec = self.spec;
        let h = spec.delay(k);
        let discrete = || spec.a(k).at(s + h);
        let distributed = || Ok::<_, Error>((s - t + h) * spec.b(k).at(s)?);
        if k <= m1 {
            Ok(discrete()? + distributed()?)
        } else if self.dec.n1 > self.dec.n2 {
            discrete()
        } else {
            distributed()
        }
    }

    /// `R(t) = Σ_{k=1..m2} ∫_{t-h_k}^t |R_k(t,s)| ds`.
    pub fn r(&self, t: f64) -> Result<f64> {
        let mut total = 0.0;
        for k in 1..=self.dec.m2() {
            let h = self.spec.delay(k);
            total += integrate_abs(|s| self.kernel(k, t, s), t - h, t, self.quad)?;
        }
        Ok(total)
    }

    /// `P_λ(t) = λR(t) + Σ_{i>n1} |a_i(t)| + Σ_{i>n2} ∫_{t-h_i}^t |b_i(θ)| dθ`.
    pub fn p(&self, lambda: f64, t: f64) -> Result<f64> {
        let spec = self.spec;
        let mut total = if lambda != 0.0 { lambda * self.r(t)? } else { 0.0 };
        for i in self.dec.n1 + 1..=spec.n() {
            total += spec.a(i).at(t)?.abs();
        }
        for i in self.dec.n2 + 1..=spec.n() {
            let h = spec.delay(i);
            total += integrate_abs(|th| spec.b(i).at(th), t - h, t, self.quad)?;
        }
        Ok(total)
    }

    /// `R^λ_k(t,s) = (S(t) - λ) R_k(t,s) 1[k <= m2] - b_k(s) 1[k > n2]`, given `S(t)`.
    fn r_lambda(&self, k: usize, lambda: f64, s_at_t: f64, t: f64, s: f64) -> Result<f64> {
        let mut v = 0.0;
        if k <= self.dec.m2() {
            v += (s_at_t - lambda) * self.kernel(k, t, s)?;
        }
        if k > self.dec.n2 {
            v -= self.spec.b(k).at(s)?;
        }
        Ok(v)
    }

    fn check_channel(&self, k: usize) -> Result<()> {
        if !in_range(k, 1, self.spec.n()) {
            return Err(Error::ChannelIndex { k, max: self.spec.n() });
        }
        Ok(())
    }

    /// `Q^λ_k(t,s) = |R^λ_k(t,s)| + P_λ(t) |R_k(t,s)| 1[k <= m2] + R(t) |b_k(s)| 1[k > n2]`.
    pub fn q(&self, k: usize, lambda: f64, t: f64, s: f64) -> Result<f64> {
        self.check_channel(k)?;
        let mut v = self.r_lambda(k, lambda, self.s(t)?, t, s)?.abs();
        if k <= self.dec.m2() {
            v += self.p(lambda, t)? * self.kernel(k, t, s)?.abs();
        }
        if k > self.dec.n2 {
            v += self.r(t)? * self.spec.b(k).at(s)?.abs();
        }
        Ok(v)
    }

    /// `∫_t^{t+h_k} Q^λ_k(θ, t) dθ`, the first argument of `Q` running over the window.
    fn q_window_integral(&self, k: usize, lambda: f64, t: f64) -> Result<f64> {
        let h = self.spec.delay(k);
        let (lo, hi) = (t, t + h);
        let mut total = integrate_abs(|th| self.r_lambda(k, lambda, self.s(th)?, th, t), lo, hi, self.quad)?;
        if k <= self.dec.m2() {
            total += integrate_abs_weighted(|th| self.kernel(k, th, t), |th| self.p(lambda, th), lo, hi, self.quad)?;
        }
        if k > self.dec.n2 && self.dec.m2() > 0 {
            let b_t = self.spec.b(k).at(t)?.abs();
            if b_t != 0.0 {
                total += b_t * integrate(|th| self.r(th), lo, hi, self.quad)?;
            }
        }
        Ok(total)
    }

    /// Returns `(S(t), F(t,λ) - λ + 2S(t))`: the stabilizing coefficient and
    /// the sum of all remaining terms of the test function.
    pub fn f_parts(&self, lambda: f64, t: f64) -> Result<(f64, f64)> {
        let spec = self.spec;
        let s_t = self.s(t)?;
        let mut rest = 0.0;
        for k in 1..=spec.n() {
            let h = spec.delay(k);
            rest += integrate_abs(|s| self.r_lambda(k, lambda, s_t, t, s), t - h, t, self.quad)?;
            rest += (lambda * h).exp() * self.q_window_integral(k, lambda, t)?;
        }
        for k in self.dec.n1 + 1..=spec.n() {
            let h = spec.delay(k);
            let shifted = spec.a(k).at(t + h)?.abs();
            rest += spec.a(k).at(t)?.abs();
            if shifted != 0.0 {
                rest += (lambda * h).exp() * (1.0 + self.r(t + h)?) * shifted;
            }
        }
        let tau = spec.tau();
        let sigma = spec.sigma().at(t + tau)?;
        rest += (lambda * tau).exp() * sigma * sigma;
        Ok((s_t, rest))
    }

    /// Test function `F(t, λ)`.
    pub fn f(&self, lambda: f64, t: f64) -> Result<f64> {
        let (s_t, rest) = self.f_parts(lambda, t)?;
        Ok(lambda - 2.0 * s_t + rest)
    }

    /// Nonlinearity factor `1 + 2e^{λh} + Σ_{k<=m2} e^{λh_k} ∫_t^{t+h_k} |R_k(θ,t)| dθ`.
    pub fn nonlinear_factor(&self, lambda: f64, t: f64) -> Result<f64> {
        let mut total = 1.0 + 2.0 * (lambda * self.spec.max_delay()).exp();
        for k in 1..=self.dec.m2() {
            let h = self.spec.delay(k);
            total += (lambda * h).exp() * integrate_abs(|th| self.kernel(k, th, t), t, t + h, self.quad)?;
        }
        Ok(total)
    }
}

pub fn s_of(spec: &EquationSpec, dec: Decomposition, t: f64) -> Result<f64> {
    Terms::new(spec, dec, QuadConfig::default())?.s(t)
}

pub fn kernel_rk(spec: &EquationSpec, dec: Decomposition, k: usize, t: f64, s: f64) -> Result<f64> {
    Terms::new(spec, dec, QuadConfig::default())?.kernel(k, t, s)
}

pub fn r_of(spec: &EquationSpec, dec: Decomposition, t: f64, quad: QuadConfig) -> Result<f64> {
    Terms::new(spec, dec, quad)?.r(t)
}

pub fn p_of(spec: &EquationSpec, dec: Decomposition, lambda: f64, t: f64, quad: QuadConfig) -> Result<f64> {
    Terms::new(spec, dec, quad)?.p(lambda, t)
}

pub fn q_of(
    spec: &EquationSpec,
    dec: Decomposition,
    k: usize,
    lambda: f64,
    t: f64,
    s: f64,
    quad: QuadConfig,
) -> Result<f64> {
    Terms::new(spec, dec, quad)?.q(k, lambda, t, s)
}

pub fn f_of(spec: &EquationSpec, dec: Decomposition, lambda: f64, t: f64, quad: QuadConfig) -> Result<f64> {
    Terms::new(spec, dec, quad)?.f(lambda, t)
}

/// The horizon a verdict was computed on. A finite scan is evidence, not a
/// certificate over all `t >= 0`, unless the coefficients are constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub t_max: f64,
    pub n_grid: usize,
    pub refine_factor: usize,
    pub time_invariant: bool,
}

impl Horizon {
    fn new(spec: &EquationSpec, scan: ScanConfig) -> Self {
        Horizon {
            t_max: scan.t_max,
            n_grid: scan.n_grid,
            refine_factor: scan.refine_factor,
            time_invariant: spec.is_time_invariant(),
        }
    }
}

/// sup over `t` of a quantity derived from `spec`; a single evaluation when
/// the coefficients are constant.
pub(crate) fn sup_over_t<F>(spec: &EquationSpec, f: F, scan: ScanConfig) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    match bounded_sup_over_t(spec, f, scan, f64::INFINITY)? {
        Scan::Complete(e) | Scan::Exceeded(e) => Ok(e),
    }
}

pub(crate) fn inf_over_t<F>(spec: &EquationSpec, mut f: F, scan: ScanConfig) -> Result<Extremum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let e = sup_over_t(spec, |t| f(t).map(|v| -v), scan)?;
    Ok(Extremum { t: e.t, value: -e.value })
}

fn bounded_sup_over_t<F>(spec: &EquationSpec, mut f: F, scan: ScanConfig, ceiling: f64) -> Result<Scan>
where
    F: FnMut(f64) -> Result<f64>,
{
    if spec.is_time_invariant() {
        let e = Extremum { t: 0.0, value: f(0.0)? };
        return Ok(if e.value > ceiling { Scan::Exceeded(e) } else { Scan::Complete(e) });
    }
    numerics::sup_scan_bounded(f, scan, ceiling)
}

/// `inf S > 0` and `sup R < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBounds {
    pub inf_s: f64,
    pub sup_r: f64,
    pub holds: bool,
}

/// `sup_t [F(t,0) + 2S(t)] / S(t) < 2`, the λ-free form of the test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioTest {
    pub sup_value: f64,
    pub at_t: f64,
    pub holds: bool,
}

/// Exponential mean square stability of the linear part.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ExponentialCertificate {
    /// `sup_t F(t, 0)`, when the kernel bounds hold.
    pub sup_f0: Option<f64>,
    /// Largest grid `λ` with `sup_t F(t, λ) <= 0`.
    pub lambda: Option<f64>,
    /// `sup_t F(t, λ)` at that `λ`.
    pub sup_f: Option<f64>,
}

/// Stability in probability of the nonlinear equation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ProbabilityCertificate {
    pub lambda: Option<f64>,
    /// Admissible initial-data radius, capped at 1.
    pub epsilon: Option<f64>,
    /// `-sup_t F(t, λ)` at the chosen `λ`.
    pub margin: Option<f64>,
    /// `sup_t` of the nonlinearity factor at the chosen `λ`.
    pub factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub decomposition: Decomposition,
    pub kernel_bounds: KernelBounds,
    pub ratio_test: Option<RatioTest>,
    pub exponential_ms: ExponentialCertificate,
    pub in_probability: ProbabilityCertificate,
    pub horizon: Horizon,
}

impl StabilityVerdict {
    /// True when the zero solution is certified stable in probability.
    pub fn certified(&self) -> bool {
        self.in_probability.epsilon.is_some()
    }
}

fn lambda_grid(spec: &EquationSpec) -> impl Iterator<Item = f64> {
    let h = spec.max_delay();
    let top = if h > 0.0 { 1.0 / h } else { 1.0 };
    (0..LAMBDA_STEPS).map(move |j| top * 0.5f64.powi(j as i32))
}

pub fn check_kernel_bounds(
    spec: &EquationSpec,
    dec: Decomposition,
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<KernelBounds> {
    let terms = Terms::new(spec, dec, quad)?;
    let inf_s = inf_over_t(spec, |t| terms.s(t), scan)?.value;
    let sup_r = sup_over_t(spec, |t| terms.r(t), scan)?.value;
    Ok(KernelBounds { inf_s, sup_r, holds: inf_s > 0.0 && sup_r < 1.0 })
}

/// `None` when `S` is not positive on the horizon.
pub fn ratio_test(
    spec: &EquationSpec,
    dec: Decomposition,
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<Option<RatioTest>> {
    let terms = Terms::new(spec, dec, quad)?;
    let inf_s = inf_over_t(spec, |t| terms.s(t), scan)?.value;
    if inf_s <= 0.0 {
        return Ok(None);
    }
    Ok(Some(ratio_from_terms(&terms, scan)?))
}

fn ratio_from_terms(terms: &Terms<'_>, scan: ScanConfig) -> Result<RatioTest> {
    let e = sup_over_t(
        terms.spec(),
        |t| {
            let (s_t, rest) = terms.f_parts(0.0, t)?;
            Ok(rest / s_t)
        },
        scan,
    )?;
    Ok(RatioTest { sup_value: e.value, at_t: e.t, holds: e.value < 2.0 })
}

pub fn verify_exponential_ms(
    spec: &EquationSpec,
    dec: Decomposition,
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<ExponentialCertificate> {
    let bounds = check_kernel_bounds(spec, dec, scan, quad)?;
    exponential_from_bounds(&Terms::new(spec, dec, quad)?, &bounds, scan)
}

fn exponential_from_bounds(
    terms: &Terms<'_>,
    bounds: &KernelBounds,
    scan: ScanConfig,
) -> Result<ExponentialCertificate> {
    if !bounds.holds {
        return Ok(ExponentialCertificate::default());
    }
    let spec = terms.spec();
    let sup_f0 = sup_over_t(spec, |t| terms.f(0.0, t), scan)?.value;
    let mut cert = ExponentialCertificate { sup_f0: Some(sup_f0), ..Default::default() };
    if sup_f0 >= 0.0 {
        return Ok(cert);
    }
    for lambda in lambda_grid(spec) {
        if let Scan::Complete(e) = bounded_sup_over_t(spec, |t| terms.f(lambda, t), scan, 0.0)? {
            cert.lambda = Some(lambda);
            cert.sup_f = Some(e.value);
            break;
        }
    }
    Ok(cert)
}

pub fn verify_stability_in_probability(
    spec: &EquationSpec,
    dec: Decomposition,
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<ProbabilityCertificate> {
    let exp = verify_exponential_ms(spec, dec, scan, quad)?;
    probability_from_exponential(&Terms::new(spec, dec, quad)?, &exp, scan)
}

fn probability_from_exponential(
    terms: &Terms<'_>,
    exp: &ExponentialCertificate,
    scan: ScanConfig,
) -> Result<ProbabilityCertificate> {
    let (Some(lambda), Some(sup_f)) = (exp.lambda, exp.sup_f) else {
        return Ok(ProbabilityCertificate::default());
    };
    let spec = terms.spec();
    let nonlin = spec.nonlinearity();
    let weight = nonlin.weight();
    let alpha = match nonlin.alpha() {
        Some(alpha) if weight > 0.0 => alpha,
        // g ≡ 0: the condition reduces to the linear one.
        _ => {
            return Ok(ProbabilityCertificate {
                lambda: Some(lambda),
                epsilon: Some(1.0),
                margin: Some(-sup_f),
                factor: None,
            })
        }
    };

    // The nonlinearity needs a strictly negative sup F; walk further down the
    // grid when the certified λ sits exactly on zero.
    let mut chosen = (sup_f < 0.0).then_some((lambda, -sup_f));
    if chosen.is_none() {
        for candidate in lambda_grid(spec).filter(|l| *l < lambda) {
            if let Scan::Complete(e) = bounded_sup_over_t(spec, |t| terms.f(candidate, t), scan, 0.0)? {
                if e.value < 0.0 {
                    chosen = Some((candidate, -e.value));
                    break;
                }
            }
        }
    }
    let Some((lambda, margin)) = chosen else {
        return Ok(ProbabilityCertificate::default());
    };
    let factor = sup_over_t(spec, |t| terms.nonlinear_factor(lambda, t), scan)?.value;
    let epsilon = (margin / (weight * factor)).powf(1.0 / (alpha - 1.0)).min(1.0);
    Ok(ProbabilityCertificate {
        lambda: Some(lambda),
        epsilon: (epsilon > 0.0).then_some(epsilon),
        margin: Some(margin),
        factor: Some(factor),
    })
}

/// Full verdict for one decomposition.
pub fn analyze(
    spec: &EquationSpec,
    dec: Decomposition,
    scan: ScanConfig,
    quad: QuadConfig,
) -> Result<StabilityVerdict> {
    if !spec.is_time_invariant() {
        scan.validate()?;
    }
    let terms = Terms::new(spec, dec, quad)?;
    let bounds = check_kernel_bounds(spec, dec, scan, quad)?;
    let ratio = if bounds.inf_s > 0.0 { Some(ratio_from_terms(&terms, scan)?) } else { None };
    let exponential_ms = exponential_from_bounds(&terms, &bounds, scan)?;
    let in_probability = probability_from_exponential(&terms, &exponential_ms, scan)?;
    Ok(StabilityVerdict {
        decomposition: dec,
        kernel_bounds: bounds,
        ratio_test: ratio,
        exponential_ms,
        in_probability,
        horizon: Horizon::new(spec, scan),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionEntry {
    pub decomposition: Decomposition,
    pub verdict: Option<StabilityVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiConditionReport {
    pub entries: Vec<ConditionEntry>,
    pub certifying: Vec<Decomposition>,
}

impl MultiConditionReport {
    pub fn any_certified(&self) -> bool {
        !self.certifying.is_empty()
    }

    pub fn get(&self, dec: Decomposition) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.decomposition == dec)
    }
}

/// Runs every decomposition `(n1, n2) ∈ [0, n]^2`. Per-cell failures are
/// recorded in the entry rather than aborting the sweep.
pub fn multi_condition(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> MultiConditionReport {
    let decs: Vec<Decomposition> = Decomposition::all(spec.n()).collect();
    let entries: Vec<ConditionEntry> = decs
        .par_iter()
        .map(|&dec| match analyze(spec, dec, scan, quad) {
            Ok(v) => ConditionEntry { decomposition: dec, verdict: Some(v), error: None },
            Err(e) => ConditionEntry { decomposition: dec, verdict: None, error: Some(e.to_string()) },
        })
        .collect();
    let certifying = entries
        .iter()
        .filter(|e| e.verdict.as_ref().is_some_and(StabilityVerdict::certified))
        .map(|e| e.decomposition)
        .collect();
    MultiConditionReport { entries, certifying }
}
