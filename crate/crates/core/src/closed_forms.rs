//! Closed-form specializations of the ratio test.
//!
//! The first group transcribes the ratio test for the four extreme
//! decompositions `(0,0)`, `(n,0)`, `(0,n)`, `(n,n)` and for equations
//! without discrete delays directly from their printed forms, with
//! quadrature for the inner integrals. They share no code with the generic
//! evaluator in [`crate::stability`] beyond the integrators, so they serve as
//! its oracle.
//!
//! The second group evaluates the scalar regions of the single-delay
//! equation
//!
//! ```text
//! dx + (a x(t-h) + b ∫_{t-h}^t x(s) ds + c x²(t-h)) dt + σ x(t-τ) dw = 0
//! ```
//!
//! and of its fading variant with `b(t) = b e^{-μt}`, `σ(t) = σ e^{-νt}`.
//! Throughout `p = σ²/2` and every inequality is strict.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::CoeffExpr;
use crate::numerics::{integrate, integrate_abs, integrate_abs_weighted, QuadConfig, ScanConfig};
use crate::spec::{EquationSpec, NonlinearTerm, NonlinearitySpec};
use crate::stability::sup_over_t;

/// Outcome of a `sup_t (...) < 2` condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupCondition {
    pub sup_value: f64,
    pub at_t: f64,
    pub holds: bool,
}

fn sup_below_two<F>(spec: &EquationSpec, f: F, scan: ScanConfig) -> Result<SupCondition>
where
    F: FnMut(f64) -> Result<f64>,
{
    let e = sup_over_t(spec, f, scan)?;
    Ok(SupCondition { sup_value: e.value, at_t: e.t, holds: e.value < 2.0 })
}

fn positive(name: &str, value: f64, t: f64) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Precondition(format!("{name}({t}) = {value} is not positive")))
    }
}

fn no_discrete_delays(spec: &EquationSpec) -> Result<()> {
    match (1..=spec.n()).find(|&k| !spec.a(k).is_zero()) {
        Some(k) => Err(Error::Precondition(format!("a_{k} is not identically zero"))),
        None => Ok(()),
    }
}

fn noise_power(spec: &EquationSpec, t: f64) -> Result<f64> {
    let s = spec.sigma().at(t + spec.tau())?;
    Ok(s * s)
}

/// Decomposition `(0,0)`: the undelayed coefficient `a_0` alone stabilizes.
pub fn undelayed_condition(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    sup_below_two(
        spec,
        |t| {
            let a0 = positive("a_0", spec.a(0).at(t)?, t)?;
            let mut sum = noise_power(spec, t)?;
            for k in 1..=spec.n() {
                let h = spec.delay(k);
                let b = spec.b(k);
                sum += spec.a(k).at(t)?.abs() + spec.a(k).at(t + h)?.abs() + b.at(t)?.abs() * h;
                sum += integrate_abs(|s| b.at(s), t - h, t, quad)?;
            }
            Ok(sum / a0)
        },
        scan,
    )
}

/// `S_0(t) = Σ_{k=0..n} a_k(t+h_k)`.
fn discrete_s(spec: &EquationSpec, t: f64) -> Result<f64> {
    (0..=spec.n()).try_fold(0.0, |acc, k| Ok(acc + spec.a(k).at(t + spec.delay(k))?))
}

/// Decomposition `(n,0)`: all discrete delays absorbed.
pub fn discrete_condition(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    let n = spec.n();
    // A_0(θ) = Σ ∫_θ^{θ+h_k} |a_k|, B_0(θ) = Σ ∫_{θ-h_k}^θ |b_k|
    let a_mass = |th: f64| -> Result<f64> {
        (1..=n).try_fold(0.0, |acc, k| Ok(acc + integrate_abs(|s| spec.a(k).at(s), th, th + spec.delay(k), quad)?))
    };
    let b_mass = |th: f64| -> Result<f64> {
        (1..=n).try_fold(0.0, |acc, k| Ok(acc + integrate_abs(|s| spec.b(k).at(s), th - spec.delay(k), th, quad)?))
    };
    sup_below_two(
        spec,
        |t| {
            let s0 = positive("S_0", discrete_s(spec, t)?, t)?;
            let mut sum = noise_power(spec, t)?;
            for k in 1..=n {
                let h = spec.delay(k);
                let (a, b) = (spec.a(k), spec.b(k));
                let a_shift = a.at(t + h)?;
                let b_t = b.at(t)?;
                sum += integrate_abs(|s| Ok(s0 * a.at(s + h)? - b.at(s)?), t - h, t, quad)?;
                sum += integrate_abs(|th| Ok(discrete_s(spec, th)? * a_shift - b_t), t, t + h, quad)?;
                if b_t != 0.0 {
                    sum += b_t.abs() * integrate(a_mass, t, t + h, quad)?;
                }
                if a_shift != 0.0 {
                    sum += a_shift.abs() * integrate(b_mass, t, t + h, quad)?;
                }
            }
            Ok(sum / s0)
        },
        scan,
    )
}

/// `S_1(t) = a_0(t) + Σ b_k(t) h_k`.
fn distributed_s(spec: &EquationSpec, t: f64) -> Result<f64> {
    (1..=spec.n()).try_fold(spec.a(0).at(t)?, |acc, k| Ok(acc + spec.b(k).at(t)? * spec.delay(k)))
}

/// `B_1(t) = Σ ∫_{t-h_k}^t (s-t+h_k) |b_k(s)| ds`.
fn distributed_mass(spec: &EquationSpec, t: f64, quad: QuadConfig) -> Result<f64> {
    (1..=spec.n()).try_fold(0.0, |acc, k| {
        let h = spec.delay(k);
        Ok(acc + integrate(|s| Ok((s - t + h) * spec.b(k).at(s)?.abs()), t - h, t, quad)?)
    })
}

/// Decomposition `(0,n)`: all distributed delays absorbed.
pub fn distributed_condition(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    let n = spec.n();
    let weight = |th: f64| -> Result<f64> {
        (1..=n).try_fold(distributed_s(spec, th)?, |acc, i| Ok(acc + spec.a(i).at(th)?.abs()))
    };
    sup_below_two(
        spec,
        |t| {
            let s1 = positive("S_1", distributed_s(spec, t)?, t)?;
            let mut inner = noise_power(spec, t)?;
            for k in 1..=n {
                let h = spec.delay(k);
                let b_t = spec.b(k).at(t)?;
                if b_t != 0.0 {
                    inner += b_t.abs() * integrate(|th| Ok(weight(th)? * (t - th + h)), t, t + h, quad)?;
                }
                let a_shift = spec.a(k).at(t + h)?.abs();
                inner += spec.a(k).at(t)?.abs();
                if a_shift != 0.0 {
                    inner += (1.0 + distributed_mass(spec, t + h, quad)?) * a_shift;
                }
            }
            Ok(inner / s1 + distributed_mass(spec, t, quad)?)
        },
        scan,
    )
}

/// `S_2(t) = a_0(t) + Σ (a_k(t+h_k) + b_k(t) h_k)`.
fn combined_s(spec: &EquationSpec, t: f64) -> Result<f64> {
    (1..=spec.n()).try_fold(spec.a(0).at(t)?, |acc, k| {
        let h = spec.delay(k);
        Ok(acc + spec.a(k).at(t + h)? + spec.b(k).at(t)? * h)
    })
}

/// Decomposition `(n,n)`: every delayed term absorbed.
pub fn combined_condition(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    let n = spec.n();
    sup_below_two(
        spec,
        |t| {
            let s2 = positive("S_2", combined_s(spec, t)?, t)?;
            let mut outer = 0.0;
            let mut inner = noise_power(spec, t)?;
            for k in 1..=n {
                let h = spec.delay(k);
                let (a, b) = (spec.a(k), spec.b(k));
                outer += integrate_abs(|s| Ok(a.at(s + h)? + (s - t + h) * b.at(s)?), t - h, t, quad)?;
                let (a_shift, b_t) = (a.at(t + h)?, b.at(t)?);
                inner += integrate_abs_weighted(
                    |th| Ok(a_shift + (t - th + h) * b_t),
                    |th| combined_s(spec, th),
                    t,
                    t + h,
                    quad,
                )?;
            }
            Ok(outer + inner / s2)
        },
        scan,
    )
}

/// Undelayed-coefficient condition for equations without discrete delays.
pub fn distributed_only_undelayed(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    no_discrete_delays(spec)?;
    sup_below_two(
        spec,
        |t| {
            let a0 = positive("a_0", spec.a(0).at(t)?, t)?;
            let mut sum = noise_power(spec, t)?;
            for k in 1..=spec.n() {
                let h = spec.delay(k);
                sum += spec.b(k).at(t)?.abs() * h + integrate_abs(|s| spec.b(k).at(s), t - h, t, quad)?;
            }
            Ok(sum / a0)
        },
        scan,
    )
}

/// Fully absorbed distributed condition for equations without discrete delays.
pub fn distributed_only_absorbed(spec: &EquationSpec, scan: ScanConfig, quad: QuadConfig) -> Result<SupCondition> {
    no_discrete_delays(spec)?;
    sup_below_two(
        spec,
        |t| {
            let s1 = positive("S_1", distributed_s(spec, t)?, t)?;
            let mut inner = noise_power(spec, t)?;
            for k in 1..=spec.n() {
                let h = spec.delay(k);
                let b_t = spec.b(k).at(t)?;
                if b_t != 0.0 {
                    inner += b_t.abs() * integrate(|th| Ok(distributed_s(spec, th)? * (t - th + h)), t, t + h, quad)?;
                }
            }
            Ok(inner / s1 + distributed_mass(spec, t, quad)?)
        },
        scan,
    )
}

/// Parameters of the scalar single-delay equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub h: f64,
    /// `σ²/2`.
    pub p: f64,
    pub tau: f64,
    /// Decay rate of the distributed kernel.
    pub mu: f64,
    /// Decay rate of the noise intensity.
    pub nu: f64,
}

impl ScalarParams {
    /// Constant coefficients, no noise delay, no nonlinearity.
    pub fn new(a: f64, b: f64, h: f64, p: f64) -> Self {
        ScalarParams { a, b, c: 0.0, h, p, tau: 0.0, mu: 0.0, nu: 0.0 }
    }

    pub fn sigma(&self) -> f64 {
        (2.0 * self.p).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.h, self.p, self.tau, self.mu, self.nu].iter().all(|v| v.is_finite());
        if !finite || self.h <= 0.0 || self.p < 0.0 || self.tau < 0.0 || self.mu < 0.0 || self.nu < 0.0 {
            return Err(Error::InvalidSpec(format!("invalid scalar parameters {self:?}")));
        }
        Ok(())
    }
}

fn quadratic_nonlinearity(pp: &ScalarParams) -> Result<NonlinearitySpec> {
    if pp.c == 0.0 {
        return Ok(NonlinearitySpec::default());
    }
    NonlinearitySpec::new(vec![NonlinearTerm { coeff: pp.c, delay: pp.h, power: 2.0 }])
}

/// `x(t-h)`-driven equation with constant coefficients: `a_0 = 0`, `a_1 = a`,
/// `b_1 = b`, `σ = √(2p)`, nonlinearity `c x²(t-h)`.
pub fn delayed_drift_spec(pp: &ScalarParams) -> Result<EquationSpec> {
    pp.validate()?;
    EquationSpec::new(
        vec![pp.h],
        vec![CoeffExpr::constant(0.0), CoeffExpr::constant(pp.a)],
        vec![CoeffExpr::constant(pp.b)],
        CoeffExpr::constant(pp.sigma()),
        pp.tau,
        quadratic_nonlinearity(pp)?,
    )
}

fn fading(amplitude: f64, rate: f64) -> Result<CoeffExpr> {
    if rate == 0.0 || amplitude == 0.0 {
        return Ok(CoeffExpr::constant(amplitude));
    }
    Ok(CoeffExpr::parse(&format!("{amplitude}*exp(-{rate}*t)"))?)
}

/// Fading-kernel equation: `a_0 = a`, `a_1 = 0`, `b_1(t) = b e^{-μt}`,
/// `σ(t) = √(2p) e^{-νt}`, nonlinearity `c x²(t-h)`.
pub fn fading_kernel_spec(pp: &ScalarParams) -> Result<EquationSpec> {
    pp.validate()?;
    EquationSpec::new(
        vec![pp.h],
        vec![CoeffExpr::constant(pp.a), CoeffExpr::constant(0.0)],
        vec![fading(pp.b, pp.mu)?],
        fading(pp.sigma(), pp.nu)?,
        pp.tau,
        quadratic_nonlinearity(pp)?,
    )
}

/// Discrete-absorption region of the constant equation, in its
/// three-branch form (sign regime of `b`).
pub fn region_discrete(pp: &ScalarParams) -> bool {
    let ScalarParams { a, b, h, p, .. } = *pp;
    if !(a > 0.0) {
        return false;
    }
    let ah = a * h;
    if b <= 0.0 {
        b > (p - a * (1.0 - ah)) / (h * (1.0 + ah))
    } else if b < a * a {
        ah < 1.0 && b > (p - a * (1.0 - ah)) / (h * (1.0 - ah))
    } else {
        b < (a * (1.0 + ah) - p) / (h * (1.0 + ah))
    }
}

/// `bh(1 - bh²/2)`, shared by the distributed and combined regions so that
/// both produce bitwise equal bounds at `a = 0`.
fn kernel_gain(a: f64, b: f64, h: f64) -> f64 {
    (a + b * h) * (1.0 - a * h - 0.5 * (b * h * h))
}

/// Distributed-absorption region of the constant equation.
pub fn region_distributed(pp: &ScalarParams) -> bool {
    let ScalarParams { a, b, h, p, .. } = *pp;
    let q = b * h * h;
    if !(q > 0.0 && q < 2.0) {
        return false;
    }
    p + a.abs() * (1.0 + 0.5 * q) < kernel_gain(0.0, b, h)
}

/// Largest `p` admitted by the combined region at `(a, b, h)`;
/// `-∞` when `a + bh <= 0`.
pub fn combined_p_max(a: f64, b: f64, h: f64) -> f64 {
    if !(a + b * h > 0.0) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        kernel_gain(a, b, h)
    } else {
        // a < 0 with a + bh > 0 forces b > 0
        (a + b * h) * (1.0 - a * h - 0.5 * (b * h * h) - a * a / b)
    }
}

/// Combined-absorption region of the constant equation.
pub fn region_combined(pp: &ScalarParams) -> bool {
    pp.p < combined_p_max(pp.a, pp.b, pp.h)
}

/// Exact value of the combined ratio for the constant equation:
/// `2∫_0^h |a + ub| du + 2p/(a + bh)`; `None` when `a + bh <= 0`.
pub fn combined_ratio(a: f64, b: f64, h: f64, p: f64) -> Option<f64> {
    let s = a + b * h;
    if !(s > 0.0) {
        return None;
    }
    Some(2.0 * abs_linear_integral(a, b, h) + 2.0 * p / s)
}

/// `∫_0^h |a + ub| du`.
fn abs_linear_integral(a: f64, b: f64, h: f64) -> f64 {
    let end = a + b * h;
    if a * end >= 0.0 {
        (0.5 * (a + end) * h).abs()
    } else {
        let root = -a / b;
        0.5 * (a.abs() * root + end.abs() * (h - root))
    }
}

/// `(e^{x} - 1)/x`, equal to 1 at `x = 0`.
fn expm1_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// `2 sinh²(x/2) / x² = (cosh x - 1)/x²`, equal to 1/2 at `x = 0`.
fn cosh_ratio(x: f64) -> f64 {
    if x == 0.0 {
        0.5
    } else {
        let s = (0.5 * x).sinh();
        2.0 * s * s / (x * x)
    }
}

/// Left side of the fading-drift condition,
/// `½|b|(h + (e^{μh} - 1)/μ) + p e^{-2ντ}`.
pub fn fading_drift_lhs(pp: &ScalarParams) -> f64 {
    let ScalarParams { b, h, p, tau, mu, nu, .. } = *pp;
    0.5 * b.abs() * (h + h * expm1_ratio(mu * h)) + p * (-2.0 * nu * tau).exp()
}

/// Fading-drift region: the undelayed coefficient `a` dominates.
pub fn region_fading_drift(pp: &ScalarParams) -> bool {
    fading_drift_lhs(pp) < pp.a
}

/// Right side of the fading-kernel condition,
/// `bh(1 - b(cosh(μh) - 1)/μ²) e^{2ντ}`; `None` unless `a = 0`, `b > 0`, `μ <= 2ν`.
pub fn fading_kernel_rhs(pp: &ScalarParams) -> Option<f64> {
    let ScalarParams { a, b, h, tau, mu, nu, .. } = *pp;
    if a != 0.0 || !(b > 0.0) || mu > 2.0 * nu {
        return None;
    }
    Some(b * h * (1.0 - b * h * h * cosh_ratio(mu * h)) * (2.0 * nu * tau).exp())
}

/// Fading-kernel region: the distributed term alone stabilizes.
pub fn region_fading_kernel(pp: &ScalarParams) -> bool {
    fading_kernel_rhs(pp).is_some_and(|rhs| pp.p < rhs)
}
