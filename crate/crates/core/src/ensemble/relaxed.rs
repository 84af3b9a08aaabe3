use super::exact::solve_weights_exact;
use super::qp::min_norm_with_slabs;
use super::{validate_l_values, BasisSet, EtaPolicy, WeightSolution};
use crate::error::{OdinError, Result};

/// Absolute tolerance on the optimal `ε`.
pub const TOL_EPSILON: f64 = 1e-6;
const MAX_BISECTIONS: usize = 200;

/// Scaled constraint rows `√N φ_i(N) ψ_i(l)`.
fn scaled_rows(l_values: &[f64], basis: &BasisSet, n: usize) -> Vec<Vec<f64>> {
    (0..basis.len())
        .map(|i| {
            let s = basis.scale(i, n);
            l_values.iter().map(|&l| s * basis.psi(i, l)).collect()
        })
        .collect()
}

fn uniform(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}

fn max_abs_dot(rows: &[Vec<f64>], w: &[f64]) -> f64 {
    rows.iter()
        .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

fn sq_norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum()
}

/// Outcome of a bisection over the slab half-width.
struct Bisection {
    weights: Vec<f64>,
    iterations: usize,
}

/// Smallest slab half-width `t` (to `TOL_EPSILON`) whose minimum-norm
/// point satisfies `‖w‖² ≤ bound(t)`. `hi` must be feasible with witness
/// `hi_weights`.
fn bisect(
    rows: &[Vec<f64>],
    mut lo: f64,
    mut hi: f64,
    hi_weights: Vec<f64>,
    bound: impl Fn(f64) -> f64,
) -> Result<Bisection> {
    let mut best = hi_weights;
    let mut iterations = 0usize;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= TOL_EPSILON {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let bounds = vec![mid; rows.len()];
        match min_norm_with_slabs(rows, &bounds) {
            Ok(sol) => {
                iterations += sol.iterations;
                if sq_norm(&sol.weights) <= bound(mid) {
                    hi = mid;
                    best = sol.weights;
                } else {
                    lo = mid;
                }
            }
            Err(OdinError::Infeasible(_)) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    if hi - lo > TOL_EPSILON {
        return Err(OdinError::NoConvergence {
            iterations,
            max_residual: hi - lo,
        });
    }
    Ok(Bisection {
        weights: best,
        iterations,
    })
}

/// Minimum `ε` with `Σ w = 1`, `|γ_w(i) √N φ_i(N)| ≤ ε` and `‖w‖² ≤ η`.
///
/// Bisects on `ε`; each candidate is decided by computing the
/// minimum-norm point of the hyperplane-and-slabs set exactly and
/// comparing its norm with `η`. The bracket starts at `[0, ε(uniform)]`.
pub fn solve_weights_relaxed(
    l_values: &[f64],
    basis: &BasisSet,
    n: usize,
    eta: f64,
) -> Result<WeightSolution> {
    validate_l_values(l_values)?;
    let len = l_values.len();
    let floor = 1.0 / len as f64;
    if eta < floor * (1.0 - 1e-12) {
        return Err(OdinError::Infeasible(format!(
            "η = {eta} is below 1/L = {floor}; Cauchy-Schwarz gives ‖w‖² ≥ (Σw)²/L = 1/L"
        )));
    }
    let rows = scaled_rows(l_values, basis, n);
    let w0 = uniform(len);
    if basis.is_empty() || len == 1 {
        return Ok(WeightSolution::assemble(l_values, basis, w0, Some(n), Some(eta), 0));
    }

    // ε = 0 is attainable when the exact solution fits inside the ball.
    if len > basis.len() {
        if let Ok(exact) = solve_weights_exact(l_values, basis) {
            if exact.norm_sq <= eta {
                return Ok(WeightSolution::assemble(
                    l_values,
                    basis,
                    exact.weights,
                    Some(n),
                    Some(eta),
                    exact.iterations,
                ));
            }
        }
    }

    let hi = max_abs_dot(&rows, &w0);
    let b = bisect(&rows, 0.0, hi, w0, |_| eta)?;
    Ok(WeightSolution::assemble(
        l_values,
        basis,
        b.weights,
        Some(n),
        Some(eta),
        b.iterations,
    ))
}

/// Relaxed solve with the norm bound tied to the objective, `η = ε`.
///
/// The optimum is the smallest `t` for which some `w` has `Σ w = 1`,
/// scaled residuals at most `t` and `‖w‖² ≤ t`; both bounds are tight
/// there. The chosen `η` is reported in the solution.
pub fn solve_weights_balanced(
    l_values: &[f64],
    basis: &BasisSet,
    n: usize,
) -> Result<WeightSolution> {
    validate_l_values(l_values)?;
    let len = l_values.len();
    let floor = 1.0 / len as f64;
    let rows = scaled_rows(l_values, basis, n);
    let w0 = uniform(len);
    if basis.is_empty() || len == 1 {
        let eps = max_abs_dot(&rows, &w0);
        return Ok(WeightSolution::assemble(
            l_values,
            basis,
            w0,
            Some(n),
            Some(eps.max(floor)),
            0,
        ));
    }
    let hi = max_abs_dot(&rows, &w0).max(floor);
    let b = bisect(&rows, 0.0, hi, w0, |t| t)?;
    let mut sol = WeightSolution::assemble(l_values, basis, b.weights, Some(n), None, b.iterations);
    sol.eta = Some(sol.epsilon.max(sol.norm_sq));
    Ok(sol)
}

/// Dispatches on the norm-bound policy.
pub fn solve_weights(
    l_values: &[f64],
    basis: &BasisSet,
    n: usize,
    eta: EtaPolicy,
) -> Result<WeightSolution> {
    match eta {
        EtaPolicy::Fixed(v) => solve_weights_relaxed(l_values, basis, n, v),
        EtaPolicy::Auto => solve_weights_balanced(l_values, basis, n),
    }
}
