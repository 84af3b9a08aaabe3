//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use odin_core::ensemble::{BasisEntry, BasisSet, EnsembleKind};
use odin_core::functional::FunctionalSpec;
use odin_core::sample::SampleSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `m x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot is negligible relative to the matrix scale.
pub fn gauss_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// `w = Aᵀ (A Aᵀ)⁻¹ b`, from the KKT system `[I Aᵀ; A 0] [w; -y] = [0; b]`
/// with one step of iterative refinement. Solving the augmented system
/// avoids squaring the condition number as the normal equations would.
pub fn kkt_min_norm(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = a.len();
    let l = a[0].len();
    let size = l + m;
    let mut k = vec![vec![0.0; size]; size];
    for i in 0..l {
        k[i][i] = 1.0;
        for j in 0..m {
            k[i][l + j] = a[j][i];
            k[l + j][i] = a[j][i];
        }
    }
    let mut rhs = vec![0.0; size];
    rhs[l..].copy_from_slice(b);
    let mut x = gauss_solve(k.clone(), rhs.clone())?;
    let residual: Vec<f64> = (0..size).map(|r| rhs[r] - dot(&k[r], &x)).collect();
    let dx = gauss_solve(k, residual)?;
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    x.truncate(l);
    Some(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Random basis of `i` entries with distinct nonzero integer powers in
/// `[-2, 3]` and rates in `(0, 0.5]`.
pub fn random_basis<R: Rng>(rng: &mut R, i: usize) -> BasisSet {
    let mut powers: Vec<i32> = (-2..=3).filter(|p| *p != 0).collect();
    for k in (1..powers.len()).rev() {
        let j = rng.random_range(0..=k);
        powers.swap(k, j);
    }
    let entries = powers[..i]
        .iter()
        .map(|&p| BasisEntry {
            label: format!("l^{p}"),
            power: p,
            rate: rng.random_range(0.05..=0.5),
        })
        .collect();
    BasisSet {
        kind: EnsembleKind::Odin1,
        dim: 1,
        entries,
    }
}

/// `len` distinct sorted values in `[lo, hi]` at least `gap` apart.
pub fn random_l_values<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..len).map(|_| rng.random_range(lo..hi)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

/// Scaled constraint rows `ψ_i(l) √N φ_i(N)`.
pub fn scaled_rows(basis: &BasisSet, l_values: &[f64], n: usize) -> Vec<Vec<f64>> {
    (0..basis.len())
        .map(|i| {
            let s = (n as f64).powf(0.5 - basis.entries[i].rate);
            l_values
                .iter()
                .map(|&l| l.powi(basis.entries[i].power) * s)
                .collect()
        })
        .collect()
}

/// Minimum of `‖w‖²` over `Σw = 1`, `|r_i · w| ≤ t`, by enumerating every
/// assignment of each slab to {lower face, inactive, upper face} and
/// keeping the feasible equality-constrained minimisers.
pub fn min_norm_enumerated(rows: &[Vec<f64>], t: f64) -> Option<f64> {
    let i_count = rows.len();
    let l = rows[0].len();
    let mut best: Option<f64> = None;
    let patterns = 3usize.pow(i_count as u32);
    for code in 0..patterns {
        let mut a = vec![vec![1.0; l]];
        let mut b = vec![1.0];
        let mut c = code;
        for r in rows {
            match c % 3 {
                1 => {
                    a.push(r.clone());
                    b.push(t);
                }
                2 => {
                    a.push(r.clone());
                    b.push(-t);
                }
                _ => {}
            }
            c /= 3;
        }
        if a.len() > l {
            continue;
        }
        let Some(w) = kkt_min_norm(&a, &b) else { continue };
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            continue;
        }
        if rows.iter().all(|r| dot(r, &w).abs() <= t * (1.0 + 1e-9) + 1e-9) {
            let n2 = dot(&w, &w);
            best = Some(best.map_or(n2, |x: f64| x.min(n2)));
        }
    }
    best
}

/// Smallest `ε` for which some `w` with `Σw = 1` and `‖w‖² ≤ eta` has all
/// scaled residuals within `ε`, by bisection over the enumeration oracle.
pub fn relaxed_oracle(rows: &[Vec<f64>], eta: f64) -> f64 {
    let l = rows[0].len();
    let uniform = vec![1.0 / l as f64; l];
    let mut hi = rows.iter().map(|r| dot(r, &uniform).abs()).fold(0.0, f64::max);
    let mut lo = 0.0;
    if min_norm_enumerated(rows, 0.0).is_some_and(|n| n <= eta) {
        return 0.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if min_norm_enumerated(rows, mid).is_some_and(|n| n <= eta) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Naive box-kernel density at `x`: each sample contributes
/// `∏_k 1{|x_k - y_k| ≤ h/2}`, divided by `n_effective · h^d`.
pub fn naive_kde(x: &[f64], samples: &SampleSet, skip: Option<usize>, h: f64, n_effective: usize) -> f64 {
    let mut count = 0u32;
    for (j, y) in samples.rows().enumerate() {
        if skip == Some(j) {
            continue;
        }
        let k: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| if (a - b).abs() <= h / 2.0 { 1.0 } else { 0.0 })
            .product();
        count += k as u32;
    }
    count as f64 / (n_effective as f64 * h.powi(x.len() as i32))
}

/// Naive plug-in estimate: clipped naive densities fed to `g`, averaged
/// over the points of `s2`.
pub fn naive_plugin(s1: &SampleSet, s2: &SampleSet, h1: f64, h2: f64, g: &FunctionalSpec) -> f64 {
    let floor = g.clip_floor;
    let n2 = s2.len();
    let mut sum = 0.0;
    for (i, x) in s2.rows().enumerate() {
        let a = naive_kde(x, s1, None, h1, s1.len()).max(floor);
        let b = naive_kde(x, s2, Some(i), h2, n2 - 1).max(floor);
        sum += g.evaluate(a, b).unwrap();
    }
    sum / n2 as f64
}

pub fn uniform_samples<R: Rng>(rng: &mut R, n: usize, d: usize) -> SampleSet {
    SampleSet::from_flat((0..n * d).map(|_| rng.random::<f64>()).collect(), d).unwrap()
}
