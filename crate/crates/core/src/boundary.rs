//! Exact stability boundary of the deterministic single-delay equation
//! `x' + a x(t-h) + b ∫_{t-h}^t x(s) ds = 0`.
//!
//! Its characteristic function is `ω + a e^{-hω} + (b/ω)(1 - e^{-hω})`.
//! Roots crossing the imaginary axis at `ω = iβ` trace the curve
//!
//! ```text
//! a = β sin(hβ) / (1 - cos(hβ)),   b = -β² cos(hβ) / (1 - cos(hβ)),
//! ```
//!
//! and roots crossing at `ω = 0` give the line `a + bh = 0`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest admissible `1 - cos(hβ)`.
const MIN_DENOMINATOR: f64 = 1e-12;

/// First positive root of `tan x = x`. For `hβ` in `(0, X_STAR)` the curve
/// bounds the exact stability region together with the line `a + bh = 0`.
pub const X_STAR: f64 = 4.493_409_457_909_064;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub beta: f64,
    pub a: f64,
    pub b: f64,
}

pub fn characteristic_residual(a: f64, b: f64, h: f64, omega: Complex64) -> Result<Complex64> {
    if omega == Complex64::new(0.0, 0.0) {
        return Err(Error::Domain("characteristic function is singular at ω = 0".into()));
    }
    let decay = (-h * omega).exp();
    Ok(omega + a * decay + b / omega * (1.0 - decay))
}

pub fn boundary_point(beta: f64, h: f64) -> Result<BoundaryPoint> {
    if !(h > 0.0 && beta.is_finite() && h.is_finite()) {
        return Err(Error::Domain(format!("invalid boundary arguments β = {beta}, h = {h}")));
    }
    let x = h * beta;
    // 1 - cos x, without cancellation near x = 0
    let half = (0.5 * x).sin();
    let denom = 2.0 * half * half;
    if denom < MIN_DENOMINATOR {
        return Err(Error::Domain(format!("1 - cos(hβ) = {denom:e} at β = {beta}")));
    }
    Ok(BoundaryPoint { beta, a: beta * x.sin() / denom, b: -beta * beta * x.cos() / denom })
}

/// `n_pts` points with `β` evenly spaced over `[beta_lo, beta_hi]`.
pub fn boundary_curve(h: f64, beta_lo: f64, beta_hi: f64, n_pts: usize) -> Result<Vec<BoundaryPoint>> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("delay must be positive, got {h}")));
    }
    if !(0.0 < beta_lo && beta_lo <= beta_hi && beta_hi < 2.0 * PI / h) {
        return Err(Error::Domain(format!("β range must satisfy 0 < lo <= hi < 2π/h, got [{beta_lo}, {beta_hi}]")));
    }
    if n_pts == 0 || (n_pts == 1 && beta_lo != beta_hi) {
        return Err(Error::Domain(format!("cannot sample [{beta_lo}, {beta_hi}] with {n_pts} points")));
    }
    let step = if n_pts > 1 { (beta_hi - beta_lo) / (n_pts - 1) as f64 } else { 0.0 };
    (0..n_pts)
        .map(|i| {
            let beta = if i + 1 == n_pts { beta_hi } else { beta_lo + i as f64 * step };
            boundary_point(beta, h)
        })
        .collect()
}

/// Closed polygon of the exact stability region in the `(a, b)` plane: the
/// curve for `hβ ∈ (0, X_STAR)` closed along the line `a + bh = 0`.
pub fn stability_region_polygon(h: f64, n_pts: usize) -> Result<Vec<(f64, f64)>> {
    let eps = 1e-4 / h;
    let curve = boundary_curve(h, eps, X_STAR / h, n_pts.max(2))?;
    Ok(curve.into_iter().map(|p| (p.a, p.b)).collect())
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len().wrapping_sub(1);
    for i in 0..poly.len() {
        let ((xi, yi), (xj, yj)) = (poly[i], poly[j]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Distance from `(x, y)` to the polygon's edges.
pub fn distance_to_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut j = poly.len().wrapping_sub(1);
    for i in 0..poly.len() {
        let ((x0, y0), (x1, y1)) = (poly[j], poly[i]);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let len2 = dx * dx + dy * dy;
        let u = if len2 > 0.0 { (((x - x0) * dx + (y - y0) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        best = best.min((x - x0 - u * dx).hypot(y - y0 - u * dy));
        j = i;
    }
    best
}
