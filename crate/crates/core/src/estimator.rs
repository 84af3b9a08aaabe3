//! Ensemble divergence estimators: weighted sums of plug-in estimates
//! over a grid of bandwidths.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::ensemble::{
    default_lambda, linspace, odin1_basis, odin2_basis, solve_weights, BasisSet, EnsembleKind,
    EtaPolicy, WeightSolution,
};
use crate::error::{OdinError, Result};
use crate::functional::{plugin_from_counts, Bandwidths, EstimateResult, FunctionalSpec};
use crate::kernel::{positivity_radius, KernelSpec, NeighborCounts};
use crate::sample::SampleSet;

pub const DEFAULT_ENSEMBLE_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Odin1,
    Odin2,
    /// Individual plug-in estimates at each `h(l)` of the ODin2 rule.
    #[serde(rename = "plugin")]
    PluginBaseline,
}

impl EstimatorKind {
    /// Bandwidth rule used for `l`.
    pub fn rule(&self) -> EnsembleKind {
        match self {
            EstimatorKind::Odin1 => EnsembleKind::Odin1,
            EstimatorKind::Odin2 | EstimatorKind::PluginBaseline => EnsembleKind::Odin2,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Odin1 => "odin1",
            EstimatorKind::Odin2 => "odin2",
            EstimatorKind::PluginBaseline => "plugin",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = OdinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odin1" => Ok(Self::Odin1),
            "odin2" => Ok(Self::Odin2),
            "plugin" => Ok(Self::PluginBaseline),
            _ => Err(OdinError::Parse(format!("unknown estimator '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub kind: EstimatorKind,
    pub l_values: Vec<f64>,
    #[serde(default)]
    pub eta: EtaPolicy,
    pub functional: FunctionalSpec,
    /// ODin2 `λ`; defaults to the smallest even integer `≥ d + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    /// ODin2 smoothness cap on `j`; unbounded when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_cap: Option<u32>,
}

impl EnsembleConfig {
    /// `L = 50` members evenly spaced over the kind's default range.
    pub fn with_defaults(kind: EstimatorKind, functional: FunctionalSpec) -> Self {
        let (lo, hi) = kind.rule().default_l_range();
        Self::with_range(kind, functional, lo, hi, DEFAULT_ENSEMBLE_SIZE)
    }

    pub fn with_range(
        kind: EstimatorKind,
        functional: FunctionalSpec,
        l_min: f64,
        l_max: f64,
        size: usize,
    ) -> Self {
        Self {
            kind,
            l_values: linspace(l_min, l_max, size),
            eta: EtaPolicy::Auto,
            functional,
            lambda: None,
            s_cap: None,
        }
    }

    pub fn ensemble_size(&self) -> usize {
        self.l_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_values.is_empty() {
            return Err(OdinError::Config("ℒ must not be empty".into()));
        }
        if self.l_values.iter().any(|l| !(*l > 0.0) || !l.is_finite())
            || self.l_values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(OdinError::Config(
                "ℒ must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Bias basis for dimension `d`. The plug-in baseline has none.
    pub fn basis(&self, d: usize) -> Result<Option<BasisSet>> {
        match self.kind {
            EstimatorKind::Odin1 => Ok(Some(odin1_basis(d))),
            EstimatorKind::Odin2 => Ok(Some(odin2_basis(
                d,
                self.lambda.unwrap_or_else(|| default_lambda(d)),
                self.s_cap,
            )?)),
            EstimatorKind::PluginBaseline => Ok(None),
        }
    }

    /// `h(l)` for each member at sample size `n`.
    pub fn bandwidths(&self, n: usize, d: usize) -> Vec<f64> {
        let rule = self.kind.rule();
        self.l_values.iter().map(|&l| rule.bandwidth(l, n, d)).collect()
    }

    /// Solves for the ensemble weights; they depend only on
    /// `(kind, d, N, ℒ, η)`, never on data.
    pub fn solve_weights(&self, n: usize, d: usize) -> Result<WeightSolution> {
        self.validate()?;
        let basis = self.basis(d)?.ok_or_else(|| {
            OdinError::InvalidArgument("the plug-in baseline has no ensemble weights".into())
        })?;
        solve_weights(&self.l_values, &basis, n, self.eta)
    }
}

/// Plug-in estimates of one sample pair at many bandwidths, sharing one
/// pass over each pair of sample sets.
#[derive(Debug, Clone)]
pub struct PluginTable {
    bandwidths: Vec<f64>,
    results: Vec<EstimateResult>,
    /// Points with an empty leave-one-out box, per bandwidth.
    empty_own: Vec<usize>,
    /// Points with no `f1` sample in their box, per bandwidth.
    empty_cross: Vec<usize>,
}

impl PluginTable {
    pub fn compute(
        s1: &SampleSet,
        s2: &SampleSet,
        bandwidths: &[f64],
        g: &FunctionalSpec,
    ) -> Result<Self> {
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
        if let Some(h) = bandwidths.iter().find(|h| !(**h > 0.0) || !h.is_finite()) {
            return Err(OdinError::DegenerateBandwidth {
                h: *h,
                d: s2.dim(),
            });
        }
        let mut hs = bandwidths.to_vec();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        let kernel = KernelSpec::UniformProduct;
        let radii: Vec<f64> = hs.iter().map(|&h| kernel.radius(h)).collect();
        let cross = NeighborCounts::compute(s2, s1, false, &radii)?;
        let own = NeighborCounts::compute(s2, s2, true, &radii)?;
        let results = hs
            .iter()
            .enumerate()
            .map(|(k, &h)| {
                plugin_from_counts(
                    cross.column(k),
                    own.column(k),
                    s1.len(),
                    s2.len(),
                    h,
                    h,
                    s2.dim(),
                    g,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let empties = |c: &NeighborCounts, k: usize| c.column(k).filter(|&v| v == 0).count();
        Ok(Self {
            empty_own: (0..hs.len()).map(|k| empties(&own, k)).collect(),
            empty_cross: (0..hs.len()).map(|k| empties(&cross, k)).collect(),
            bandwidths: hs,
            results,
        })
    }

    fn index(&self, h: f64) -> Option<usize> {
        self.bandwidths.binary_search_by(|x| x.total_cmp(&h)).ok()
    }

    /// Whether every density estimate `g` needs is positive at `h`.
    pub fn positive_at(&self, h: f64, g: &FunctionalSpec) -> Option<bool> {
        self.index(h).map(|k| {
            self.empty_own[k] == 0 && (!g.needs_positive_f1() || self.empty_cross[k] == 0)
        })
    }

    /// Distinct bandwidths, ascending.
    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn get(&self, h: f64) -> Option<&EstimateResult> {
        self.index(h).map(|k| &self.results[k])
    }

    /// `Σ_l w(l) G̃_{h(l)}`, summed in `l` order.
    pub fn weighted(&self, l_values: &[f64], h_values: &[f64], weights: &[f64]) -> Result<EstimateResult> {
        if l_values.len() != h_values.len() || l_values.len() != weights.len() {
            return Err(OdinError::InvalidArgument(format!(
                "{} ensemble members but {} bandwidths and {} weights",
                l_values.len(),
                h_values.len(),
                weights.len()
            )));
        }
        let mut per_l = Vec::with_capacity(l_values.len());
        let mut clipped_count = 0;
        let (mut n1, mut n2) = (0, 0);
        for (&l, &h) in l_values.iter().zip(h_values) {
            let r = self.get(h).ok_or_else(|| {
                OdinError::InvalidArgument(format!("bandwidth {h} was not tabulated"))
            })?;
            if !r.value.is_finite() {
                return Err(OdinError::NonFiniteEstimate { l });
            }
            per_l.push(r.value);
            clipped_count += r.clipped_count;
            (n1, n2) = (r.n1, r.n2);
        }
        let value = per_l.iter().zip(weights).fold(0.0, |acc, (v, w)| acc + w * v);
        Ok(EstimateResult {
            value,
            bandwidths: Bandwidths::Ensemble(h_values.to_vec()),
            clipped_count,
            n1,
            n2,
            per_l,
        })
    }
}

/// Safety factor applied above a data-derived `l_min`.
pub const DEFAULT_LMIN_MARGIN: f64 = 1.1;
/// Raised ranges start on multiples of this step.
pub const LMIN_STEP: f64 = 0.05;

/// Smallest `l` at which, under the configuration's bandwidth rule, every
/// density estimate the functional needs is strictly positive.
pub fn data_l_min(s1: &SampleSet, s2: &SampleSet, config: &EnsembleConfig) -> Result<f64> {
    let (_, r) = positivity_radius(s1, s2, config.functional.needs_positive_f1())?;
    Ok(l_for_radius(r, config.kind, s2.len(), s2.dim()))
}

/// `l` whose kernel box under `kind`'s rule just reaches Chebyshev distance `r`.
pub fn l_for_radius(r: f64, kind: EstimatorKind, n: usize, d: usize) -> f64 {
    let unit = kind.rule().bandwidth(1.0, n, d);
    r / KernelSpec::UniformProduct.radius(unit)
}

/// `ℒ` shifted up with its width kept so that `min ℒ ≥ margin · l_min`,
/// starting on a multiple of [`LMIN_STEP`]. Returned unchanged when it
/// already satisfies the bound.
pub fn raise_l_values(l_values: &[f64], l_min: f64, margin: f64) -> Vec<f64> {
    let target = l_min * margin;
    match l_values.first() {
        Some(&first) if first < target => {
            let start = (target / LMIN_STEP).ceil() * LMIN_STEP;
            let width = l_values[l_values.len() - 1] - first;
            linspace(start, start + width, l_values.len())
        }
        _ => l_values.to_vec(),
    }
}

fn check_equal_sizes(s1: &SampleSet, s2: &SampleSet) -> Result<usize> {
    if s1.len() != s2.len() {
        return Err(OdinError::SampleSizeMismatch {
            n1: s1.len(),
            n2: s2.len(),
        });
    }
    Ok(s1.len())
}

/// Weighted ensemble of plug-in estimates at `h(l)`, `l ∈ config.l_values`.
pub fn ensemble_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    config: &EnsembleConfig,
    weights: &WeightSolution,
) -> Result<EstimateResult> {
    config.validate()?;
    if config.kind == EstimatorKind::PluginBaseline {
        return Err(OdinError::InvalidArgument(
            "the plug-in baseline is not an ensemble; use plugin_sweep".into(),
        ));
    }
    let n = check_equal_sizes(s1, s2)?;
    if weights.l_values != config.l_values {
        return Err(OdinError::InvalidArgument(
            "weights were solved for a different ℒ".into(),
        ));
    }
    let hs = config.bandwidths(n, s2.dim());
    let table = PluginTable::compute(s1, s2, &hs, &config.functional)?;
    table.weighted(&config.l_values, &hs, &weights.weights)
}

/// Solves the weights for `config` and applies them.
pub fn odin_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    config: &EnsembleConfig,
) -> Result<(EstimateResult, WeightSolution)> {
    let n = check_equal_sizes(s1, s2)?;
    let w = config.solve_weights(n, s2.dim())?;
    let r = ensemble_estimate(s1, s2, config, &w)?;
    Ok((r, w))
}

fn require_kind(config: &EnsembleConfig, kind: EstimatorKind) -> Result<()> {
    if config.kind != kind {
        return Err(OdinError::InvalidArgument(format!(
            "expected a {kind} configuration, got {}",
            config.kind
        )));
    }
    Ok(())
}

pub fn odin1_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    config: &EnsembleConfig,
) -> Result<(EstimateResult, WeightSolution)> {
    require_kind(config, EstimatorKind::Odin1)?;
    odin_estimate(s1, s2, config)
}

pub fn odin2_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    config: &EnsembleConfig,
) -> Result<(EstimateResult, WeightSolution)> {
    require_kind(config, EstimatorKind::Odin2)?;
    odin_estimate(s1, s2, config)
}

/// `(1 − ρ) a + ρ b`; exact at both endpoints.
pub fn combine(a: f64, b: f64, rho: f64) -> f64 {
    (1.0 - rho) * a + rho * b
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(OdinError::InvalidArgument(format!("ρ = {rho} is outside [0, 1]")));
    }
    Ok(())
}

/// Convex combination of an ODin1 and an ODin2 estimate.
pub fn combined_estimate(
    s1: &SampleSet,
    s2: &SampleSet,
    cfg1: &EnsembleConfig,
    cfg2: &EnsembleConfig,
    rho: f64,
) -> Result<EstimateResult> {
    check_rho(rho)?;
    let (a, _) = odin1_estimate(s1, s2, cfg1)?;
    let (b, _) = odin2_estimate(s1, s2, cfg2)?;
    combine_results(&a, &b, rho)
}

pub fn combine_results(a: &EstimateResult, b: &EstimateResult, rho: f64) -> Result<EstimateResult> {
    check_rho(rho)?;
    let mut hs = match &a.bandwidths {
        Bandwidths::Ensemble(h) => h.clone(),
        Bandwidths::Pair { h1, h2 } => vec![*h1, *h2],
    };
    match &b.bandwidths {
        Bandwidths::Ensemble(h) => hs.extend(h),
        Bandwidths::Pair { h1, h2 } => hs.extend([*h1, *h2]),
    }
    Ok(EstimateResult {
        value: combine(a.value, b.value, rho),
        bandwidths: Bandwidths::Ensemble(hs),
        clipped_count: a.clipped_count + b.clipped_count,
        n1: a.n1,
        n2: a.n2,
        per_l: Vec::new(),
    })
}

/// Plug-in estimate at each `h(l)` of the configuration, using the
/// bandwidth rule at `N2`. Unequal sample sizes are allowed.
pub fn plugin_sweep(
    s1: &SampleSet,
    s2: &SampleSet,
    config: &EnsembleConfig,
) -> Result<Vec<EstimateResult>> {
    config.validate()?;
    let hs = config.bandwidths(s2.len(), s2.dim());
    let table = PluginTable::compute(s1, s2, &hs, &config.functional)?;
    Ok(hs.iter().map(|&h| table.get(h).expect("tabulated").clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct WeightKey {
    kind: EstimatorKind,
    dim: usize,
    n: usize,
    l_bits: Vec<u64>,
    eta: String,
    lambda: Option<u32>,
    s_cap: Option<u32>,
}

/// Memoised weight solutions keyed by `(kind, d, N, ℒ, η)`, with a count
/// of the solves actually performed.
#[derive(Debug, Default)]
pub struct WeightCache {
    map: Mutex<HashMap<WeightKey, Arc<WeightSolution>>>,
    solves: AtomicUsize,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, config: &EnsembleConfig, n: usize, d: usize) -> Result<Arc<WeightSolution>> {
        let key = WeightKey {
            kind: config.kind,
            dim: d,
            n,
            l_bits: config.l_values.iter().map(|l| l.to_bits()).collect(),
            eta: config.eta.to_string(),
            lambda: config.lambda,
            s_cap: config.s_cap,
        };
        if let Some(w) = self.map.lock().expect("weight cache poisoned").get(&key) {
            return Ok(Arc::clone(w));
        }
        let w = Arc::new(config.solve_weights(n, d)?);
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut map = self.map.lock().expect("weight cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(w)))
    }

    /// Number of weight problems solved so far.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }
}
