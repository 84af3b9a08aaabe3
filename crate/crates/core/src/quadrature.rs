//! Adaptive Simpson quadrature on a finite interval.

use crate::error::{OdinError, Result};

const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    /// Sum of the local Richardson error estimates.
    pub error: f64,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Integral> {
    if !(b > a) || !(tol > 0.0) {
        return Err(OdinError::InvalidArgument(format!(
            "need a < b and tol > 0 (got [{a}, {b}], tol {tol})"
        )));
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut converged = true;
    let (value, error) = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut converged);
    if !converged || !value.is_finite() || error > tol {
        return Err(OdinError::Quadrature {
            requested: tol,
            achieved: error,
        });
    }
    Ok(Integral { value, error })
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    converged: &mut bool,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Require a few levels before trusting the estimate.
    if depth + 4 <= MAX_DEPTH && delta.abs() <= 15.0 * tol {
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    if depth == 0 {
        *converged = false;
        return (left + right + delta / 15.0, delta.abs() / 15.0);
    }
    let (lv, le) = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, converged);
    let (rv, re) = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, converged);
    (lv + rv, le + re)
}
