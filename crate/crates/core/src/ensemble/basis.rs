use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    /// Bandwidth `h(l) = l N^{-1/(2d)}`.
    Odin1,
    /// Bandwidth `h(l) = l N^{-1/(d+1)}`.
    Odin2,
}

impl EnsembleKind {
    pub fn bandwidth(&self, l: f64, n: usize, d: usize) -> f64 {
        let n = n as f64;
        match self {
            EnsembleKind::Odin1 => l * n.powf(-1.0 / (2.0 * d as f64)),
            EnsembleKind::Odin2 => l * n.powf(-1.0 / (d as f64 + 1.0)),
        }
    }

    /// `[min ℒ, max ℒ]` used when nothing else is configured.
    pub fn default_l_range(&self) -> (f64, f64) {
        match self {
            EnsembleKind::Odin1 => (1.5, 3.0),
            EnsembleKind::Odin2 => (2.0, 3.0),
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleKind::Odin1 => "odin1",
            EnsembleKind::Odin2 => "odin2",
        })
    }
}

/// One bias term: `ψ(l) = l^power`, `φ(N) = N^{-rate}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisEntry {
    pub label: String,
    pub power: i32,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub entries: Vec<BasisEntry>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn psi(&self, i: usize, l: f64) -> f64 {
        l.powi(self.entries[i].power)
    }

    pub fn phi(&self, i: usize, n: usize) -> f64 {
        (n as f64).powf(-self.entries[i].rate)
    }

    /// Constraint scale `√N φ_i(N)`.
    pub fn scale(&self, i: usize, n: usize) -> f64 {
        (n as f64).powf(0.5 - self.entries[i].rate)
    }

    pub fn bandwidth(&self, l: f64, n: usize) -> f64 {
        self.kind.bandwidth(l, n, self.dim)
    }

    /// Row `i` is `ψ_i` evaluated over `l_values`.
    pub fn rows(&self, l_values: &[f64]) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| l_values.iter().map(|&l| self.psi(i, l)).collect())
            .collect()
    }
}

/// ODin1 basis in dimension `d`: `ψ_i(l) = l^i` with `φ = N^{-i/(2d)}`
/// for `i = 1..d`, plus `ψ_{d+1}(l) = l^{-d}` with `φ = N^{-1/2}`.
pub fn odin1_basis(d: usize) -> BasisSet {
    let dd = d as f64;
    let mut entries: Vec<BasisEntry> = (1..=d)
        .map(|i| BasisEntry {
            label: format!("l^{i}"),
            power: i as i32,
            rate: i as f64 / (2.0 * dd),
        })
        .collect();
    entries.push(BasisEntry {
        label: format!("l^-{d}"),
        power: -(d as i32),
        rate: 0.5,
    });
    BasisSet {
        kind: EnsembleKind::Odin1,
        dim: d,
        entries,
    }
}

/// Smallest even integer `≥ d + 1`.
pub fn default_lambda(d: usize) -> u32 {
    let m = d as u32 + 1;
    m + (m % 2)
}

/// ODin2 basis in dimension `d`: one entry per `(j, q)` with
/// `0 < j + q < (d + 1)/2`, `q ≤ lambda/2` and `j ≤ s_cap` (unbounded when
/// `None`), giving `ψ(l) = l^{j - dq}` and `φ(N) = N^{-(j+q)/(d+1)}`.
///
/// Entries are ordered by `q`, then `j`.
pub fn odin2_basis(d: usize, lambda: u32, s_cap: Option<u32>) -> Result<BasisSet> {
    if d == 0 {
        return Err(OdinError::InvalidArgument("dimension must be at least 1".into()));
    }
    let required = d as u32 + 1;
    if lambda < required {
        return Err(OdinError::LambdaTooSmall { lambda, required });
    }
    // j + q < (d+1)/2  <=>  2(j + q) < d + 1
    let bound = |s: u32| 2 * s < required;
    let q_max = lambda / 2;
    let mut entries = Vec::new();
    for q in 0..=q_max {
        for j in 0.. {
            if let Some(cap) = s_cap {
                if j > cap {
                    break;
                }
            }
            let s = j + q;
            if !bound(s) {
                break;
            }
            if s == 0 {
                continue;
            }
            entries.push(BasisEntry {
                label: format!("(j={j},q={q})"),
                power: j as i32 - (d as i32) * q as i32,
                rate: s as f64 / (d as f64 + 1.0),
            });
        }
    }
    Ok(BasisSet {
        kind: EnsembleKind::Odin2,
        dim: d,
        entries,
    })
}
