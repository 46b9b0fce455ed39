//! Scalar stochastic delay equation with time-varying coefficients:
//!
//! ```text
//! dx(t) + ( Σ_{k=0..n} a_k(t) x(t-h_k) + Σ_{k=1..n} ∫_{t-h_k}^t b_k(s) x(s) ds + g(t, x_t) ) dt
//!       + σ(t) x(t-τ) dw(t) = 0,        h_0 = 0,
//! ```
//!
//! with `g(t, x_t) = Σ_i c_i x(t-d_i)^{α_i}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::CoeffExpr;

/// A coefficient function with its value cached when it does not depend on `t`.
#[derive(Debug, Clone)]
pub struct Coefficient {
    expr: CoeffExpr,
    constant: Option<f64>,
}

impl Coefficient {
    pub fn new(expr: CoeffExpr) -> Self {
        let constant = expr.constant_value();
        Coefficient { expr, constant }
    }

    pub fn constant(value: f64) -> Self {
        Coefficient::new(CoeffExpr::constant(value))
    }

    #[inline]
    pub fn at(&self, t: f64) -> Result<f64> {
        match self.constant {
            Some(v) => Ok(v),
            None => Ok(self.expr.eval(t)?),
        }
    }

    pub fn expr(&self) -> &CoeffExpr {
        &self.expr
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    /// True for a `t`-free expression equal to zero.
    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }
}

impl From<CoeffExpr> for Coefficient {
    fn from(expr: CoeffExpr) -> Self {
        Coefficient::new(expr)
    }
}

/// One monomial `c · x(t - d)^α` of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonlinearTerm {
    pub coeff: f64,
    pub delay: f64,
    pub power: f64,
}

/// Nonlinearity as a finite sum of delayed monomials with powers above one.
///
/// For `|x| <= 1` the sum is bounded by `G |x|^α` with `α = min α_i` and
/// `G = Σ |c_i|`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NonlinearitySpec {
    pub terms: Vec<NonlinearTerm>,
}

impl NonlinearitySpec {
    pub fn new(terms: Vec<NonlinearTerm>) -> Result<Self> {
        for term in &terms {
            if !(term.power > 1.0 && term.power.is_finite()) {
                return Err(Error::InvalidSpec(format!("nonlinearity power must exceed 1, got {}", term.power)));
            }
            if !(term.delay >= 0.0 && term.delay.is_finite()) || !term.coeff.is_finite() {
                return Err(Error::InvalidSpec(format!("invalid nonlinearity term {term:?}")));
            }
        }
        Ok(NonlinearitySpec { terms })
    }

    /// Smallest power `α`; `None` when there are no terms.
    pub fn alpha(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.power).reduce(f64::min)
    }

    /// Total weight `G = Σ |c_i|`.
    pub fn weight(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.iter().map(|t| t.delay).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct EquationSpec {
    delays: Vec<f64>,
    a: Vec<Coefficient>,
    b: Vec<Coefficient>,
    sigma: Coefficient,
    tau: f64,
    nonlinearity: NonlinearitySpec,
}

impl EquationSpec {
    /// `delays` holds `h_1..h_n`, `a` holds `a_0..a_n`, `b` holds `b_1..b_n`.
    pub fn new(
        delays: Vec<f64>,
        a: Vec<CoeffExpr>,
        b: Vec<CoeffExpr>,
        sigma: CoeffExpr,
        tau: f64,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        let n = delays.len();
        if a.len() != n + 1 {
            return Err(Error::InvalidSpec(format!("expected {} a-coefficients (a_0..a_{n}), got {}", n + 1, a.len())));
        }
        if b.len() != n {
            return Err(Error::InvalidSpec(format!("expected {n} b-coefficients, got {}", b.len())));
        }
        if let Some(h) = delays.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidSpec(format!("delays must be positive, got {h}")));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise delay must be non-negative, got {tau}")));
        }
        let spec = EquationSpec {
            delays,
            a: a.into_iter().map(Coefficient::new).collect(),
            b: b.into_iter().map(Coefficient::new).collect(),
            sigma: Coefficient::new(sigma),
            tau,
            nonlinearity,
        };
        if spec.nonlinearity.max_delay() > spec.max_delay() {
            return Err(Error::InvalidSpec(format!(
                "nonlinearity delay {} exceeds the maximal delay {}",
                spec.nonlinearity.max_delay(),
                spec.max_delay()
            )));
        }
        Ok(spec)
    }

    /// Convenience constructor from expression strings.
    pub fn parse(
        delays: &[f64],
        a: &[&str],
        b: &[&str],
        sigma: &str,
        tau: f64,
        nonlinearity: NonlinearitySpec,
    ) -> Result<Self> {
        let parse_all = |xs: &[&str]| -> Result<Vec<CoeffExpr>> {
            xs.iter().map(|s| CoeffExpr::parse(s).map_err(Error::from)).collect()
        };
        EquationSpec::new(delays.to_vec(), parse_all(a)?, parse_all(b)?, CoeffExpr::parse(sigma)?, tau, nonlinearity)
    }

    /// Number of delay channels.
    pub fn n(&self) -> usize {
        self.delays.len()
    }

    /// `h_k` for `k` in `0..=n`, with `h_0 = 0`.
    #[inline]
    pub fn delay(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.delays[k - 1]
        }
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    /// `a_k` for `k` in `0..=n`.
    #[inline]
    pub fn a(&self, k: usize) -> &Coefficient {
        &self.a[k]
    }

    /// `b_k` for `k` in `1..=n`.
    #[inline]
    pub fn b(&self, k: usize) -> &Coefficient {
        &self.b[k - 1]
    }

    pub fn sigma(&self) -> &Coefficient {
        &self.sigma
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    /// `h = max(h_1, ..., h_n, τ)`.
    pub fn max_delay(&self) -> f64 {
        self.delays.iter().copied().fold(self.tau, f64::max)
    }

    /// True when every linear coefficient is constant in `t`.
    pub fn is_time_invariant(&self) -> bool {
        self.a.iter().chain(self.b.iter()).all(Coefficient::is_constant) && self.sigma.is_constant()
    }

    pub fn with_nonlinearity(mut self, nonlinearity: NonlinearitySpec) -> Result<Self> {
        if nonlinearity.max_delay() > self.max_delay() {
            return Err(Error::InvalidSpec("nonlinearity delay exceeds the maximal delay".into()));
        }
        self.nonlinearity = nonlinearity;
        Ok(self)
    }
}

/// Choice `(n1, n2)` of how many discrete (`n1`) and distributed (`n2`)
/// channels are folded into the stabilizing term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Decomposition {
    pub n1: usize,
    pub n2: usize,
}

impl Decomposition {
    pub fn new(n1: usize, n2: usize, n: usize) -> Result<Self> {
        if n1 > n || n2 > n {
            return Err(Error::Decomposition { n1, n2, n });
        }
        Ok(Decomposition { n1, n2 })
    }

    pub fn m1(&self) -> usize {
        self.n1.min(self.n2)
    }

    pub fn m2(&self) -> usize {
        self.n1.max(self.n2)
    }

    pub fn check(&self, n: usize) -> Result<()> {
        Decomposition::new(self.n1, self.n2, n).map(|_| ())
    }

    /// All `(n + 1)^2` decompositions, `n1`-major.
    pub fn all(n: usize) -> impl Iterator<Item = Decomposition> {
        (0..=n).flat_map(move |n1| (0..=n).map(move |n2| Decomposition { n1, n2 }))
    }
}

/// Indicator of `k ∈ [lo, hi]` on integers.
#[inline]
pub(crate) fn in_range(k: usize, lo: usize, hi: usize) -> bool {
    lo <= k && k <= hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let none = NonlinearitySpec::default;
        assert!(EquationSpec::parse(&[0.5], &["0"], &["1"], "0", 0.0, none()).is_err());
        assert!(EquationSpec::parse(&[0.5], &["0", "1"], &[], "0", 0.0, none()).is_err());
        assert!(EquationSpec::parse(&[-0.5], &["0", "1"], &["1"], "0", 0.0, none()).is_err());
        assert!(EquationSpec::parse(&[0.5], &["0", "1"], &["1"], "0", -1.0, none()).is_err());
        let far = NonlinearitySpec::new(vec![NonlinearTerm { coeff: 1.0, delay: 2.0, power: 2.0 }]).unwrap();
        assert!(EquationSpec::parse(&[0.5], &["0", "1"], &["1"], "0", 0.0, far).is_err());
        assert!(NonlinearitySpec::new(vec![NonlinearTerm { coeff: 1.0, delay: 0.0, power: 1.0 }]).is_err());
    }

    #[test]
    fn derived_quantities() {
        let nl = NonlinearitySpec::new(vec![
            NonlinearTerm { coeff: -2.0, delay: 0.5, power: 3.0 },
            NonlinearTerm { coeff: 1.0, delay: 0.0, power: 2.0 },
        ])
        .unwrap();
        assert_eq!(nl.alpha(), Some(2.0));
        assert_eq!(nl.weight(), 3.0);
        let spec = EquationSpec::parse(&[0.5, 0.2], &["1", "0", "t"], &["1", "0"], "1", 0.7, nl).unwrap();
        assert_eq!(spec.n(), 2);
        assert_eq!(spec.max_delay(), 0.7);
        assert_eq!(spec.delay(0), 0.0);
        assert_eq!(spec.delay(2), 0.2);
        assert!(!spec.is_time_invariant());
    }

    #[test]
    fn decompositions() {
        assert_eq!(Decomposition::all(1).count(), 4);
        assert_eq!(Decomposition::all(3).count(), 16);
        let d = Decomposition::new(2, 1, 2).unwrap();
        assert_eq!((d.m1(), d.m2()), (1, 2));
        assert!(Decomposition::new(2, 0, 1).is_err());
        assert!(in_range(2, 1, 3) && !in_range(0, 1, 3) && !in_range(1, 2, 1));
    }
}
