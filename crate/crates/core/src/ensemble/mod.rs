//! Bias basis functions and ensemble weight optimisation.
//!
//! An ensemble estimator averages base estimators indexed by `l ∈ ℒ`
//! with weights `w` summing to one. Each base estimator's bias expands in
//! terms `c_i ψ_i(l) φ_i(N)`; the weights are chosen to shrink the
//! weighted sums `γ_w(i) = Σ_l w(l) ψ_i(l)` while keeping `‖w‖²` small.
//!
//! Two problems are solved here:
//!
//! * the exact problem: minimum `‖w‖` subject to `Σ w = 1` and
//!   `γ_w(i) = 0` ([`solve_weights_exact`]);
//! * the relaxed problem: minimum `ε` subject to `Σ w = 1`,
//!   `|γ_w(i) √N φ_i(N)| ≤ ε` and `‖w‖² ≤ η` ([`solve_weights_relaxed`],
//!   or [`solve_weights_balanced`] for the self-consistent `η = ε` choice).

mod basis;
mod exact;
mod qp;
mod relaxed;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use basis::{default_lambda, odin1_basis, odin2_basis, BasisEntry, BasisSet, EnsembleKind};
pub use exact::{min_norm_solution, solve_weights_exact};
pub use qp::{min_norm_with_slabs, SlabSolution};
pub use relaxed::{solve_weights, solve_weights_balanced, solve_weights_relaxed, TOL_EPSILON};

use crate::error::{OdinError, Result};

/// Equality tolerance for `Σ w = 1`.
pub const TOL_SUM: f64 = 1e-10;
/// Tolerance on constraint residuals.
pub const TOL_CONSTRAINT: f64 = 1e-8;

/// Weights over `ℒ` with the diagnostics of the solve that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSolution {
    pub l_values: Vec<f64>,
    pub weights: Vec<f64>,
    /// Achieved `max_i |γ_w(i)| √N φ_i(N)`; zero for the exact solver.
    pub epsilon: f64,
    /// Norm bound the solution was computed under, if any.
    pub eta: Option<f64>,
    pub norm_sq: f64,
    pub iterations: usize,
    /// `|γ_w(i)|` per basis entry.
    pub residuals: Vec<f64>,
    /// `|γ_w(i)| √N φ_i(N)` per basis entry (empty for the exact solver).
    pub scaled_residuals: Vec<f64>,
}

impl WeightSolution {
    pub(crate) fn assemble(
        l_values: &[f64],
        basis: &BasisSet,
        weights: Vec<f64>,
        n: Option<usize>,
        eta: Option<f64>,
        iterations: usize,
    ) -> Self {
        let residuals: Vec<f64> = (0..basis.len())
            .map(|i| gamma(basis, i, l_values, &weights).abs())
            .collect();
        let scaled_residuals: Vec<f64> = match n {
            Some(n) => residuals
                .iter()
                .enumerate()
                .map(|(i, r)| r * basis.scale(i, n))
                .collect(),
            None => Vec::new(),
        };
        let epsilon = scaled_residuals.iter().copied().fold(0.0, f64::max);
        let norm_sq = weights.iter().map(|w| w * w).sum();
        Self {
            l_values: l_values.to_vec(),
            weights,
            epsilon,
            eta,
            norm_sq,
            iterations,
            residuals,
            scaled_residuals,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Checks the certificate of an exact solve.
    pub fn verify_exact(&self) -> std::result::Result<(), String> {
        self.verify_sum()?;
        if let Some((i, r)) = self
            .residuals
            .iter()
            .enumerate()
            .find(|(_, r)| **r > TOL_CONSTRAINT)
        {
            return Err(format!("|γ_w({i})| = {r:e} exceeds {TOL_CONSTRAINT:e}"));
        }
        Ok(())
    }

    /// Checks the certificate of a relaxed solve.
    pub fn verify_relaxed(&self) -> std::result::Result<(), String> {
        self.verify_sum()?;
        if let Some((i, r)) = self
            .scaled_residuals
            .iter()
            .enumerate()
            .find(|(_, r)| **r > self.epsilon + TOL_CONSTRAINT)
        {
            return Err(format!(
                "scaled residual {i} = {r:e} exceeds ε = {:e}",
                self.epsilon
            ));
        }
        if let Some(eta) = self.eta {
            if self.norm_sq > eta + TOL_CONSTRAINT {
                return Err(format!("‖w‖² = {} exceeds η = {eta}", self.norm_sq));
            }
        }
        Ok(())
    }

    fn verify_sum(&self) -> std::result::Result<(), String> {
        let s = self.weight_sum();
        if (s - 1.0).abs() > TOL_SUM {
            return Err(format!("Σw = {s} differs from 1 by more than {TOL_SUM:e}"));
        }
        Ok(())
    }
}

/// `γ_w(i) = Σ_l w(l) ψ_i(l)`.
pub fn gamma(basis: &BasisSet, i: usize, l_values: &[f64], weights: &[f64]) -> f64 {
    l_values
        .iter()
        .zip(weights)
        .map(|(&l, &w)| w * basis.psi(i, l))
        .sum()
}

/// Norm bound used by the relaxed solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EtaPolicy {
    Fixed(f64),
    /// Pick `η = ε` at the optimum.
    #[default]
    Auto,
}

impl fmt::Display for EtaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaPolicy::Fixed(v) => write!(f, "fixed:{v}"),
            EtaPolicy::Auto => write!(f, "auto"),
        }
    }
}

impl FromStr for EtaPolicy {
    type Err = OdinError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "auto" {
            return Ok(EtaPolicy::Auto);
        }
        let v = s.strip_prefix("fixed:").unwrap_or(s);
        v.parse::<f64>()
            .map(EtaPolicy::Fixed)
            .map_err(|_| OdinError::Parse(format!("eta must be `auto` or `fixed:<value>`, got `{s}`")))
    }
}

impl TryFrom<String> for EtaPolicy {
    type Error = OdinError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EtaPolicy> for String {
    fn from(e: EtaPolicy) -> String {
        e.to_string()
    }
}

/// `n` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n)
                .map(|k| if k == n - 1 { stop } else { start + step * k as f64 })
                .collect()
        }
    }
}

pub(crate) fn validate_l_values(l_values: &[f64]) -> Result<()> {
    if l_values.is_empty() {
        return Err(OdinError::InvalidArgument("ℒ must be nonempty".into()));
    }
    if l_values.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(OdinError::InvalidArgument("ℒ entries must be positive and finite".into()));
    }
    if l_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OdinError::InvalidArgument(
            "ℒ entries must be strictly increasing".into(),
        ));
    }
    Ok(())
}
