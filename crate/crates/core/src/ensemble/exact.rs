use nalgebra::{DMatrix, DVector};

use super::{validate_l_values, BasisSet, WeightSolution};
use crate::error::{OdinError, Result};

/// Relative size below which a QR diagonal entry marks a dependent row.
const RANK_TOL: f64 = 1e-13;

/// Minimum-norm `w` with `A w = b`, where `a` holds the rows of `A`.
///
/// Mathematically this is `Aᵀ (A Aᵀ)⁻¹ b`; it is computed from a QR
/// factorisation of the row-normalised `Aᵀ` followed by one step of
/// iterative refinement. `labels[k]` names row `k` in rank errors.
pub fn min_norm_solution(a: &[Vec<f64>], b: &[f64], labels: &[String]) -> Result<Vec<f64>> {
    let m = a.len();
    let l = a.first().map(Vec::len).unwrap_or(0);
    if m == 0 || l == 0 || b.len() != m || a.iter().any(|r| r.len() != l) {
        return Err(OdinError::InvalidArgument("malformed constraint system".into()));
    }
    if l < m {
        return Err(OdinError::Infeasible(format!(
            "{m} equality constraints on {l} weights"
        )));
    }
    let norms: Vec<f64> = a
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(k) = norms.iter().position(|n| !(*n > 0.0) || !n.is_finite()) {
        return Err(OdinError::RankDeficient {
            row: k,
            label: labels.get(k).cloned().unwrap_or_default(),
        });
    }
    // Columns of `at` are the normalised constraint rows.
    let at = DMatrix::from_fn(l, m, |i, k| a[k][i] / norms[k]);
    let rhs = DVector::from_fn(m, |k, _| b[k] / norms[k]);
    let qr = at.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    for k in 0..m {
        if r[(k, k)].abs() <= RANK_TOL * (l as f64) {
            return Err(OdinError::RankDeficient {
                row: k,
                label: labels.get(k).cloned().unwrap_or_default(),
            });
        }
    }
    let rt = r.transpose();
    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        let y = rt
            .solve_lower_triangular(rhs)
            .expect("nonzero diagonal checked above");
        &q * y
    };
    let mut w = solve(&rhs);
    let residual = &rhs - at.transpose() * &w;
    w += solve(&residual);
    Ok(w.iter().copied().collect())
}

/// Minimum-norm weights with `Σ w = 1` and `γ_w(i) = 0` for every entry.
pub fn solve_weights_exact(l_values: &[f64], basis: &BasisSet) -> Result<WeightSolution> {
    validate_l_values(l_values)?;
    let n_l = l_values.len();
    if n_l <= basis.len() {
        return Err(OdinError::Infeasible(format!(
            "need more ensemble members than basis functions (L = {n_l}, I = {})",
            basis.len()
        )));
    }
    let mut rows = vec![vec![1.0; n_l]];
    rows.extend(basis.rows(l_values));
    let mut b = vec![0.0; rows.len()];
    b[0] = 1.0;
    let mut labels = vec!["sum".to_string()];
    labels.extend(basis.entries.iter().map(|e| e.label.clone()));
    let w = min_norm_solution(&rows, &b, &labels)?;
    Ok(WeightSolution::assemble(l_values, basis, w, None, None, 1))
}
