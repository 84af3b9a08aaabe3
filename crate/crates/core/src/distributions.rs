//! Truncated isotropic Gaussians on the unit cube: density, seeded
//! sampling and quadrature ground truth for the divergence functionals.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};
use crate::functional::{FunctionalKind, FunctionalSpec};
use crate::normal;
use crate::quadrature::adaptive_simpson;
use crate::rng;
use crate::sample::SampleSet;

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-10;

/// A normal on `[0, 1]`, renormalised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    cdf_lo: f64,
    mass: f64,
    ln_norm: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
            return Err(OdinError::InvalidArgument(format!(
                "need finite mean and positive sd (got {mean}, {sd})"
            )));
        }
        let a = -mean / sd;
        let b = (1.0 - mean) / sd;
        let cdf_lo = normal::cdf(a);
        // Use whichever tail keeps the difference well conditioned.
        let mass = if a > 0.0 {
            normal::sf(a) - normal::sf(b)
        } else {
            normal::cdf(b) - cdf_lo
        };
        if !(mass > 0.0) {
            return Err(OdinError::InvalidArgument(format!(
                "normal({mean}, {sd}²) has no representable mass on [0, 1]"
            )));
        }
        Ok(Self {
            mean,
            sd,
            cdf_lo,
            mass,
            ln_norm: (sd * mass).ln(),
        })
    }

    /// Probability mass `Z` of the untruncated normal on `[0, 1]`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        normal::pdf((x - self.mean) / self.sd) / (self.sd * self.mass)
    }

    /// Log-density on `[0, 1]`; `-∞` outside.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        normal::ln_pdf((x - self.mean) / self.sd) - self.ln_norm
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            ((normal::cdf((x - self.mean) / self.sd) - self.cdf_lo) / self.mass).clamp(0.0, 1.0)
        }
    }

    /// Inverse-CDF draw from a uniform `u ∈ (0, 1)`, kept strictly inside
    /// the unit interval.
    pub fn quantile(&self, u: f64) -> f64 {
        let x = self.mean + self.sd * normal::inv_cdf(self.cdf_lo + u * self.mass);
        x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }
}

/// Product of identical-variance truncated normals, one per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedGaussianSpec {
    pub mean: Vec<f64>,
    /// Per-coordinate variance `σ²` (covariance `σ² I`).
    pub variance: f64,
}

impl TruncatedGaussianSpec {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(OdinError::InvalidArgument("mean must have at least one coordinate".into()));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(OdinError::InvalidArgument(format!(
                "variance must be positive, got {variance}"
            )));
        }
        let spec = Self { mean, variance };
        spec.marginals()?;
        Ok(spec)
    }

    /// Mean `mu · 1_d`, covariance `variance · I_d`.
    pub fn isotropic(d: usize, mu: f64, variance: f64) -> Result<Self> {
        Self::new(vec![mu; d], variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn marginals(&self) -> Result<Vec<TruncatedNormal>> {
        let sd = self.sd();
        self.mean.iter().map(|&m| TruncatedNormal::new(m, sd)).collect()
    }

    fn marginals_unchecked(&self) -> Vec<TruncatedNormal> {
        self.marginals().expect("validated at construction")
    }
}

/// Density at `x`; zero outside the unit cube.
pub fn tg_pdf(spec: &TruncatedGaussianSpec, x: &[f64]) -> f64 {
    spec.marginals_unchecked()
        .iter()
        .zip(x)
        .map(|(m, &xi)| m.pdf(xi))
        .product()
}

/// Log-density at `x`; `-∞` outside the unit cube.
pub fn tg_ln_pdf(spec: &TruncatedGaussianSpec, x: &[f64]) -> f64 {
    spec.marginals_unchecked()
        .iter()
        .zip(x)
        .map(|(m, &xi)| m.ln_pdf(xi))
        .sum()
}

/// Draws `n` points using the caller's generator. Row-major, one
/// uniform per coordinate.
pub fn tg_sample_with<R: Rng + ?Sized>(
    spec: &TruncatedGaussianSpec,
    n: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    if n == 0 {
        return Err(OdinError::InvalidArgument("sample size must be at least 1".into()));
    }
    let marginals = spec.marginals()?;
    let mut data = Vec::with_capacity(n * marginals.len());
    for _ in 0..n {
        for m in &marginals {
            let u: f64 = rng.sample(Open01);
            data.push(m.quantile(u));
        }
    }
    SampleSet::from_flat(data, marginals.len())
}

/// Draws `n` points from a stream keyed by `seed`.
pub fn tg_sample(spec: &TruncatedGaussianSpec, n: usize, seed: u64) -> Result<SampleSet> {
    let mut r = rng::stream(seed, &[]);
    tg_sample_with(spec, n, &mut r)
}

/// Quadrature value of a divergence functional between two truncated
/// Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Achieved absolute error bound.
    pub tolerance: f64,
    /// One-dimensional factors (Rényi: multiplied; KL: summed).
    pub factors: Vec<f64>,
}

/// `G(f1, f2)` for product densities `p = f1`, `q = f2`.
///
/// The Rényi-α integral factorises as `∏_i ∫ p_i^α q_i^{1-α}` and the KL
/// form `∫ q ln(q/p)` as a sum of one-dimensional terms.
pub fn true_divergence(
    g: &FunctionalSpec,
    p: &TruncatedGaussianSpec,
    q: &TruncatedGaussianSpec,
    tol: f64,
) -> Result<OracleValue> {
    if p.dim() != q.dim() {
        return Err(OdinError::DimensionMismatch {
            expected: q.dim(),
            found: p.dim(),
        });
    }
    let d = p.dim();
    let per_dim_tol = tol / d as f64;
    let pm = p.marginals()?;
    let qm = q.marginals()?;
    match g.kind {
        FunctionalKind::Renyi { alpha } => {
            let mut factors = Vec::with_capacity(d);
            let mut errors = Vec::with_capacity(d);
            for (a, b) in pm.iter().zip(&qm) {
                let r = adaptive_simpson(
                    |x| (alpha * a.ln_pdf(x) + (1.0 - alpha) * b.ln_pdf(x)).exp(),
                    0.0,
                    1.0,
                    per_dim_tol,
                )?;
                factors.push(r.value);
                errors.push(r.error);
            }
            let value: f64 = factors.iter().product();
            // First-order propagation of the per-factor errors.
            let tolerance = errors
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    e * factors
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != i)
                        .map(|(_, f)| f.abs())
                        .product::<f64>()
                })
                .sum();
            Ok(OracleValue {
                value,
                tolerance,
                factors,
            })
        }
        FunctionalKind::Kl => {
            let mut factors = Vec::with_capacity(d);
            let mut tolerance = 0.0;
            for (a, b) in pm.iter().zip(&qm) {
                let r = adaptive_simpson(
                    |x| {
                        let lb = b.ln_pdf(x);
                        lb.exp() * (lb - a.ln_pdf(x))
                    },
                    0.0,
                    1.0,
                    per_dim_tol,
                )?;
                factors.push(r.value);
                tolerance += r.error;
            }
            Ok(OracleValue {
                value: factors.iter().sum(),
                tolerance,
                factors,
            })
        }
        FunctionalKind::Constant { value } => Ok(OracleValue {
            value,
            tolerance: 0.0,
            factors: vec![],
        }),
    }
}
