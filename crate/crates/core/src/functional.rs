//! Divergence functionals `G(f1, f2) = ∫ g(f1(x), f2(x)) f2(x) dx` and
//! their kernel plug-in estimate.
//!
//! The plug-in estimate averages `g(f̃1(X_i), f̃2(X_i))` over the samples
//! `X_i` of `f2`, where `f̃1` uses every sample of `f1` and `f̃2` is the
//! leave-one-out estimate over the remaining `N2 - 1` samples of `f2`.
//!
//! With `g(x, y) = -ln(x / y)` the functional is `∫ f2 ln(f2 / f1)`, i.e.
//! the KL divergence of `f2` from `f1`. With `g(x, y) = (x / y)^α` it is
//! the Rényi-α integral `∫ f1^α f2^(1-α)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};
use crate::kernel::{bandwidth_volume, density_from_count, pairwise_chebyshev, KernelSpec};
use crate::sample::SampleSet;

pub const DEFAULT_CLIP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FunctionalKind {
    Kl,
    Renyi { alpha: f64 },
    /// `g ≡ value`; handy for checking the averaging machinery.
    Constant { value: f64 },
}

/// A scalar function `g(x, y)` of two density values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FunctionalSpec {
    pub kind: FunctionalKind,
    /// Density arguments below this are raised to it before `g` is applied.
    pub clip_floor: f64,
}

impl FunctionalSpec {
    pub fn kl() -> Self {
        Self {
            kind: FunctionalKind::Kl,
            clip_floor: DEFAULT_CLIP_FLOOR,
        }
    }

    pub fn renyi(alpha: f64) -> Self {
        Self {
            kind: FunctionalKind::Renyi { alpha },
            clip_floor: DEFAULT_CLIP_FLOOR,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self {
            kind: FunctionalKind::Constant { value },
            clip_floor: DEFAULT_CLIP_FLOOR,
        }
    }

    pub fn with_clip_floor(mut self, floor: f64) -> Self {
        self.clip_floor = floor;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FunctionalKind::Kl => "kl",
            FunctionalKind::Renyi { .. } => "renyi",
            FunctionalKind::Constant { .. } => "constant",
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            FunctionalKind::Renyi { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// Whether `g` is Lipschitz on `[clip_floor, ∞)²`, which the CLT needs.
    pub fn lipschitz(&self) -> bool {
        true
    }

    /// Whether `g(x, y)` is unbounded as `x → 0`, so the cross estimate of
    /// `f1` must be positive as well as the leave-one-out estimate of `f2`.
    pub fn needs_positive_f1(&self) -> bool {
        match self.kind {
            FunctionalKind::Kl => true,
            FunctionalKind::Renyi { alpha } => alpha <= 0.0,
            FunctionalKind::Constant { .. } => false,
        }
    }

    /// Rényi orders outside `(0, 1)` are accepted but have no test coverage.
    pub fn untested(&self) -> bool {
        matches!(self.kind, FunctionalKind::Renyi { alpha } if !(alpha > 0.0 && alpha < 1.0))
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        match self.kind {
            FunctionalKind::Kl => g_kl(x, y),
            FunctionalKind::Renyi { alpha } => g_renyi(x, y, alpha),
            FunctionalKind::Constant { value } => Ok(value),
        }
    }
}

impl fmt::Display for FunctionalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FunctionalKind::Kl => write!(f, "kl"),
            FunctionalKind::Renyi { alpha } => write!(f, "renyi:alpha={alpha}"),
            FunctionalKind::Constant { value } => write!(f, "constant:value={value}"),
        }
    }
}

impl FromStr for FunctionalSpec {
    type Err = OdinError;

    /// Accepts `kl`, `renyi:alpha=A` and `constant:value=C`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, params) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<Option<f64>> {
            let mut found = None;
            for kv in params.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| OdinError::Parse(format!("expected key=value in `{kv}`")))?;
                if k.trim() != key {
                    return Err(OdinError::Parse(format!("unknown parameter `{k}` for `{name}`")));
                }
                found = Some(
                    v.trim()
                        .parse()
                        .map_err(|e| OdinError::Parse(format!("{key}: {e}")))?,
                );
            }
            Ok(found)
        };
        match name.trim() {
            "kl" if params.trim().is_empty() => Ok(Self::kl()),
            "renyi" => Ok(Self::renyi(param("alpha")?.unwrap_or(0.5))),
            "constant" => Ok(Self::constant(param("value")?.unwrap_or(1.0))),
            other => Err(OdinError::Parse(format!("unknown functional `{other}`"))),
        }
    }
}

impl TryFrom<String> for FunctionalSpec {
    type Error = OdinError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FunctionalSpec> for String {
    fn from(g: FunctionalSpec) -> String {
        g.to_string()
    }
}

/// `(x / y)^alpha`.
pub fn g_renyi(x: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(OdinError::NonpositiveDensity {
            name: "renyi".into(),
            x,
            y,
        });
    }
    Ok((x / y).powf(alpha))
}

/// `-ln(x / y)`.
pub fn g_kl(x: f64, y: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(OdinError::NonpositiveDensity {
            name: "kl".into(),
            x,
            y,
        });
    }
    Ok(-(x / y).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidths {
    Pair { h1: f64, h2: f64 },
    /// One shared bandwidth per ensemble member, in `l` order.
    Ensemble(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub value: f64,
    pub bandwidths: Bandwidths,
    /// Density evaluations raised to the clip floor.
    pub clipped_count: usize,
    pub n1: usize,
    pub n2: usize,
    /// Base plug-in value per ensemble member, in `l` order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_l: Vec<f64>,
}

/// Plug-in value from in-box counts at each `X_i`: `cross[i]` samples of
/// `f1` and `own[i]` other samples of `f2` inside the kernel box.
///
/// Each term depends only on its count pair, so the terms are grouped by
/// pair and summed in ascending pair order. The result is independent of
/// the order of the samples.
#[allow(clippy::too_many_arguments)]
pub(crate) fn plugin_from_counts(
    cross: impl Iterator<Item = u32>,
    own: impl Iterator<Item = u32>,
    n1: usize,
    n2: usize,
    h1: f64,
    h2: f64,
    dim: usize,
    g: &FunctionalSpec,
) -> Result<EstimateResult> {
    if n2 < 2 {
        return Err(OdinError::EmptyEffectiveSample);
    }
    let v1 = bandwidth_volume(h1, dim)?;
    let v2 = bandwidth_volume(h2, dim)?;
    let mut pairs: Vec<(u32, u32)> = cross.zip(own).collect();
    pairs.sort_unstable();

    let floor = g.clip_floor;
    let clip = |f: f64| if f < floor { (floor, 1) } else { (f, 0) };
    let mut clipped_count = 0usize;
    let mut sum = 0.0;
    for run in pairs.chunk_by(|a, b| a == b) {
        let (c1, c2) = run[0];
        let (a, ca) = clip(density_from_count(c1, n1, v1));
        let (b, cb) = clip(density_from_count(c2, n2 - 1, v2));
        clipped_count += (ca + cb) * run.len();
        sum += run.len() as f64 * g.evaluate(a, b)?;
    }
    Ok(EstimateResult {
        value: sum / pairs.len() as f64,
        bandwidths: Bandwidths::Pair { h1, h2 },
        clipped_count,
        n1,
        n2,
        per_l: Vec::new(),
    })
}

/// Kernel plug-in estimate of `G(f1, f2)` from samples `s1 ~ f1` and
/// `s2 ~ f2`, with bandwidths `h1` for `f̃1` and `h2` for the
/// leave-one-out `f̃2`.
pub fn plugin_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    h1: f64,
    h2: f64,
    g: &FunctionalSpec,
) -> Result<EstimateResult> {
    if s1.dim() != s2.dim() {
        return Err(OdinError::DimensionMismatch {
            expected: s2.dim(),
            found: s1.dim(),
        });
    }
    if s2.len() < 2 {
        return Err(OdinError::InvalidSamples(
            "leave-one-out estimation needs at least two samples from f2".into(),
        ));
    }
    let kernel = KernelSpec::UniformProduct;
    let cross = pairwise_chebyshev(s2, s1, false)?;
    let own = pairwise_chebyshev(s2, s2, true)?;
    let (r1, r2) = (kernel.radius(h1), kernel.radius(h2));
    plugin_from_counts(
        (0..s2.len()).map(|i| cross.count_within(i, r1)),
        (0..s2.len()).map(|i| own.count_within(i, r2)),
        s1.len(),
        s2.len(),
        h1,
        h2,
        s2.dim(),
        g,
    )
}
