//! Minimum-norm point of `{w : Σ w = 1, |a_i · w| ≤ b_i}`.
//!
//! Dual active-set method of Goldfarb and Idnani specialised to the
//! identity Hessian: start from the unconstrained minimiser `w = 0`, add
//! the most violated constraint, and take steps along its projection onto
//! the null space of the active normals, dropping active constraints
//! whose multipliers would change sign. Terminates in finitely many steps
//! with an exact (up to rounding) optimum or a proof of infeasibility.

use nalgebra::{DMatrix, DVector};

use crate::error::{OdinError, Result};

const DEPENDENT_TOL: f64 = 1e-11;
const MAX_STEPS_PER_CONSTRAINT: usize = 200;

#[derive(Debug, Clone)]
pub struct SlabSolution {
    pub weights: Vec<f64>,
    pub iterations: usize,
}

struct Constraint {
    normal: DVector<f64>,
    rhs: f64,
    equality: bool,
}

/// Solves `min ‖w‖²` subject to `Σ w = 1` and `|rows[i] · w| ≤ bounds[i]`.
pub fn min_norm_with_slabs(rows: &[Vec<f64>], bounds: &[f64]) -> Result<SlabSolution> {
    let l = match rows.first() {
        Some(r) if !r.is_empty() => r.len(),
        _ => {
            return Err(OdinError::InvalidArgument(
                "slab system needs at least one nonempty row".into(),
            ))
        }
    };
    if rows.len() != bounds.len() || rows.iter().any(|r| r.len() != l) {
        return Err(OdinError::InvalidArgument("malformed slab system".into()));
    }
    if bounds.iter().any(|b| !(*b >= 0.0)) {
        return Err(OdinError::InvalidArgument("slab bounds must be nonnegative".into()));
    }

    // All constraints in `n · w >= rhs` form with unit normals.
    let inv_sqrt_l = 1.0 / (l as f64).sqrt();
    let mut cons = vec![Constraint {
        normal: DVector::from_element(l, inv_sqrt_l),
        rhs: inv_sqrt_l,
        equality: true,
    }];
    for (row, &b) in rows.iter().zip(bounds) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            continue;
        }
        let n = DVector::from_iterator(l, row.iter().map(|v| v / norm));
        let beta = b / norm;
        cons.push(Constraint {
            normal: n.clone(),
            rhs: -beta,
            equality: false,
        });
        cons.push(Constraint {
            normal: -n,
            rhs: -beta,
            equality: false,
        });
    }

    let mut x = DVector::zeros(l);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let max_iter = MAX_STEPS_PER_CONSTRAINT * cons.len().max(l);
    let mut pending = Some(0usize);

    loop {
        let p = match pending.take() {
            Some(p) => p,
            None => {
                let scale = 1.0 + x.amax();
                let mut worst: Option<(usize, f64)> = None;
                for (j, c) in cons.iter().enumerate() {
                    if c.equality || active.contains(&j) {
                        continue;
                    }
                    let s = c.normal.dot(&x) - c.rhs;
                    let tol = 1e-12 * scale.max(c.rhs.abs());
                    if s < -tol && worst.is_none_or(|(_, w)| s < w) {
                        worst = Some((j, s));
                    }
                }
                match worst {
                    Some((j, _)) => j,
                    None => break,
                }
            }
        };

        let mut mult_p = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                let viol = cons
                    .iter()
                    .map(|c| (c.rhs - c.normal.dot(&x)).max(0.0))
                    .fold(0.0, f64::max);
                return Err(OdinError::NoConvergence {
                    iterations,
                    max_residual: viol,
                });
            }
            let np = &cons[p].normal;
            let (z, r) = step_directions(&cons, &active, np);
            let s_p = np.dot(&x) - cons[p].rhs;

            // Largest step keeping the active inequality multipliers >= 0.
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, &a) in active.iter().enumerate() {
                if !cons[a].equality && r[k] > 0.0 {
                    let ratio = mult[k] / r[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }

            let zz = z.norm_squared();
            if zz.sqrt() <= DEPENDENT_TOL {
                // Normal lies in the span of the active set: only a dual step.
                let k = drop_at.ok_or_else(|| {
                    OdinError::Infeasible("slab constraints are inconsistent with Σw = 1".into())
                })?;
                for (m, rk) in mult.iter_mut().zip(r.iter()) {
                    *m -= t1 * rk;
                }
                mult_p += t1;
                active.remove(k);
                mult.remove(k);
                continue;
            }

            let t2 = -s_p / zz;
            if t2 <= t1 {
                x.axpy(t2, &z, 1.0);
                for (m, rk) in mult.iter_mut().zip(r.iter()) {
                    *m -= t2 * rk;
                }
                active.push(p);
                mult.push(mult_p + t2);
                break;
            }
            let k = drop_at.expect("t1 finite implies a blocking constraint");
            x.axpy(t1, &z, 1.0);
            for (m, rk) in mult.iter_mut().zip(r.iter()) {
                *m -= t1 * rk;
            }
            mult_p += t1;
            active.remove(k);
            mult.remove(k);
        }
    }

    Ok(SlabSolution {
        weights: x.iter().copied().collect(),
        iterations,
    })
}

/// Primal direction `z = (I - P) n` and dual direction `r = N⁺ n` for the
/// active normal matrix `N`.
fn step_directions(
    cons: &[Constraint],
    active: &[usize],
    n: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (n.clone(), DVector::zeros(0));
    }
    let l = n.len();
    let k = active.len();
    let mat = DMatrix::from_fn(l, k, |i, c| cons[active[c]].normal[i]);
    let qr = mat.qr();
    let (q, r) = (qr.q(), qr.r());
    let v = q.transpose() * n;
    let z = n - &q * &v;
    let dual = r
        .solve_upper_triangular(&v)
        .unwrap_or_else(|| DVector::from_element(k, f64::INFINITY));
    (z, dual)
}
