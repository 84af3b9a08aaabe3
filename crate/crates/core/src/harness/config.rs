use serde::{Deserialize, Serialize};

use crate::distributions::TruncatedGaussianSpec;
use crate::ensemble::{EnsembleKind, EtaPolicy};
use crate::error::{OdinError, Result};
use crate::estimator::{EnsembleConfig, EstimatorKind, DEFAULT_ENSEMBLE_SIZE};
use crate::functional::FunctionalSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MseSweep,
    Clt,
    #[serde(alias = "tuning-sweep")]
    Tuning,
    #[serde(alias = "rho-sweep")]
    Rho,
}

impl ExperimentKind {
    pub fn default_trials(&self) -> usize {
        match self {
            ExperimentKind::Clt => 200,
            _ => 100,
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = OdinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse-sweep" => Ok(Self::MseSweep),
            "clt" => Ok(Self::Clt),
            "tuning" | "tuning-sweep" => Ok(Self::Tuning),
            "rho" | "rho-sweep" => Ok(Self::Rho),
            _ => Err(OdinError::Parse(format!("unknown experiment '{s}'"))),
        }
    }
}

/// One truncated Gaussian with mean `mean · 1_d`. Give either `variance`
/// or `std_dev`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianCase {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_dev: Option<f64>,
}

impl GaussianCase {
    pub fn with_variance(mean: f64, variance: f64) -> Self {
        Self {
            mean,
            variance: Some(variance),
            std_dev: None,
        }
    }

    pub fn variance(&self) -> Result<f64> {
        match (self.variance, self.std_dev) {
            (Some(v), None) => Ok(v),
            (None, Some(s)) => Ok(s * s),
            _ => Err(OdinError::Config(
                "density needs exactly one of `variance` or `std_dev`".into(),
            )),
        }
    }

    pub fn spec(&self, d: usize) -> Result<TruncatedGaussianSpec> {
        TruncatedGaussianSpec::isotropic(d, self.mean, self.variance()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityCase {
    pub name: String,
    pub f1: GaussianCase,
    pub f2: GaussianCase,
}

impl DensityCase {
    /// `f1 = N(0.7·1, 0.1 I)`, `f2 = N(0.3·1, 0.1 I)` on the unit cube.
    pub fn shifted() -> Self {
        Self {
            name: "shifted".into(),
            f1: GaussianCase::with_variance(0.7, 0.1),
            f2: GaussianCase::with_variance(0.3, 0.1),
        }
    }

    /// Both densities `N(0.3·1, 0.3 I)`.
    pub fn same() -> Self {
        Self {
            name: "same".into(),
            f1: GaussianCase::with_variance(0.3, 0.3),
            f2: GaussianCase::with_variance(0.3, 0.3),
        }
    }

    /// `f1 = N(0.7·1, 0.1 I)`, `f2 = N(0.3·1, 0.3 I)`.
    pub fn different() -> Self {
        Self {
            name: "different".into(),
            f1: GaussianCase::with_variance(0.7, 0.1),
            f2: GaussianCase::with_variance(0.3, 0.3),
        }
    }
}

/// An estimator to run in every cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorEntry {
    pub kind: EstimatorKind,
    /// Label used in outputs; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default)]
    pub eta: EtaPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
}

impl EstimatorEntry {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            name: None,
            l_min: None,
            l_max: None,
            size: None,
            eta: EtaPolicy::Auto,
            lambda: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.to_string())
    }

    pub fn config(&self, functional: FunctionalSpec, default_size: usize) -> EnsembleConfig {
        let (lo, hi) = self.kind.rule().default_l_range();
        let mut c = EnsembleConfig::with_range(
            self.kind,
            functional,
            self.l_min.unwrap_or(lo),
            self.l_max.unwrap_or(hi),
            self.size.unwrap_or(default_size),
        );
        c.eta = self.eta;
        c.lambda = self.lambda;
        c
    }
}

/// A named `[min ℒ, max ℒ]` range per ensemble kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LSet {
    pub name: String,
    pub odin1: (f64, f64),
    pub odin2: (f64, f64),
}

impl LSet {
    pub fn range(&self, kind: EnsembleKind) -> (f64, f64) {
        match kind {
            EnsembleKind::Odin1 => self.odin1,
            EnsembleKind::Odin2 => self.odin2,
        }
    }

    /// The five ranges compared in the robustness study.
    pub fn standard_sets() -> Vec<LSet> {
        [
            ((1.5, 3.0), (2.0, 3.0)),
            ((1.75, 3.0), (2.25, 3.0)),
            ((2.0, 3.0), (2.5, 3.0)),
            ((2.25, 3.0), (2.75, 3.0)),
            ((2.5, 3.0), (2.75, 3.25)),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, (odin1, odin2))| LSet {
            name: format!("set{}", i + 1),
            odin1,
            odin2,
        })
        .collect()
    }
}

/// Keeps `min ℒ` above the data's `l_min`, the smallest `l` at which every
/// density estimate the functional needs is positive.
///
/// Per cell, `l_min` is taken as the largest value over `pilots` extra
/// seeded draws and each ensemble's `ℒ` is raised (width kept) to start at
/// `margin · l_min`. A trial whose own data still violates the bound gets
/// its `ℒ` raised the same way before its weights are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LminGuard {
    pub enabled: bool,
    pub pilots: usize,
    pub margin: f64,
}

impl Default for LminGuard {
    fn default() -> Self {
        Self {
            enabled: true,
            pilots: 20,
            margin: crate::estimator::DEFAULT_LMIN_MARGIN,
        }
    }
}

fn default_dimensions() -> Vec<usize> {
    vec![4]
}

fn default_sample_sizes() -> Vec<usize> {
    vec![100, 240, 560, 1330, 3200]
}

fn default_functional() -> FunctionalSpec {
    FunctionalSpec::renyi(0.5)
}

fn default_densities() -> Vec<DensityCase> {
    vec![DensityCase::shifted()]
}

fn default_estimators() -> Vec<EstimatorEntry> {
    vec![
        EstimatorEntry::new(EstimatorKind::Odin1),
        EstimatorEntry::new(EstimatorKind::Odin2),
        EstimatorEntry::new(EstimatorKind::PluginBaseline),
    ]
}

fn default_ensemble_size() -> usize {
    DEFAULT_ENSEMBLE_SIZE
}

fn default_etas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0, 10.0]
}

fn default_eta_l_range() -> (f64, f64) {
    (2.0, 3.0)
}

fn default_rho_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn default_quadrature_tol() -> f64 {
    crate::distributions::DEFAULT_QUADRATURE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<usize>,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    /// Trials per cell; the kind's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_functional")]
    pub functional: FunctionalSpec,
    #[serde(default = "default_densities")]
    pub densities: Vec<DensityCase>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorEntry>,
    /// Default `L` for estimators that do not set `size`.
    #[serde(default = "default_ensemble_size")]
    pub ensemble_size: usize,
    /// `ℒ` ranges for the tuning sweep.
    #[serde(default = "LSet::standard_sets")]
    pub l_sets: Vec<LSet>,
    /// Fixed `η` values for the tuning sweep.
    #[serde(default = "default_etas")]
    pub etas: Vec<f64>,
    /// `ℒ` range shared by both kinds during the `η` sweep.
    #[serde(default = "default_eta_l_range")]
    pub eta_l_range: (f64, f64),
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default)]
    pub lmin_guard: LminGuard,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_quadrature_tol")]
    pub quadrature_tol: f64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            dimensions: default_dimensions(),
            sample_sizes: default_sample_sizes(),
            trials: None,
            seed: 0,
            functional: default_functional(),
            densities: default_densities(),
            estimators: default_estimators(),
            ensemble_size: default_ensemble_size(),
            l_sets: LSet::standard_sets(),
            etas: default_etas(),
            eta_l_range: default_eta_l_range(),
            rho_grid: default_rho_grid(),
            lmin_guard: LminGuard::default(),
            threads: None,
            quadrature_tol: default_quadrature_tol(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.kind.default_trials())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(OdinError::Config(m.to_string()));
        let t = self.trials();
        if t == 0 {
            return bad("trials must be at least 1");
        }
        if self.kind == ExperimentKind::Clt && t < 50 {
            return bad("the CLT experiment needs at least 50 trials");
        }
        if matches!(self.kind, ExperimentKind::MseSweep | ExperimentKind::Tuning | ExperimentKind::Rho)
            && t < 2
        {
            return bad("MSE and standard error need at least 2 trials");
        }
        if self.dimensions.is_empty() || self.dimensions.contains(&0) {
            return bad("dimensions must be a nonempty list of positive integers");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sample sizes must be nonempty and strictly ascending");
        }
        if self.sample_sizes[0] < 2 {
            return bad("sample sizes must be at least 2");
        }
        if self.densities.is_empty() {
            return bad("at least one density case is required");
        }
        for c in &self.densities {
            c.f1.variance()?;
            c.f2.variance()?;
        }
        if self.estimators.is_empty() {
            return bad("at least one estimator is required");
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("estimator labels must be unique");
        }
        if self.ensemble_size == 0 {
            return bad("ensemble size must be at least 1");
        }
        for e in &self.estimators {
            e.config(self.functional, self.ensemble_size).validate()?;
        }
        if !(self.quadrature_tol > 0.0) {
            return bad("quadrature tolerance must be positive");
        }
        match self.kind {
            ExperimentKind::Tuning => {
                if self.etas.is_empty() {
                    return bad("the tuning sweep needs a nonempty η list");
                }
                if self.etas.iter().any(|e| !(*e > 0.0)) {
                    return bad("η values must be positive");
                }
                if self.l_sets.is_empty() {
                    return bad("the tuning sweep needs at least one ℒ set");
                }
                if !self.has_ensemble() {
                    return bad("the tuning sweep needs an ODin estimator");
                }
            }
            ExperimentKind::Rho => {
                if self.rho_grid.is_empty() || self.rho_grid.iter().any(|r| !(0.0..=1.0).contains(r)) {
                    return bad("ρ grid must be a nonempty subset of [0, 1]");
                }
                if self.first(EstimatorKind::Odin1).is_none() || self.first(EstimatorKind::Odin2).is_none() {
                    return bad("the ρ sweep needs an ODin1 and an ODin2 estimator");
                }
            }
            ExperimentKind::Clt => {
                if !self.has_ensemble() {
                    return bad("the CLT experiment needs an ODin estimator");
                }
            }
            ExperimentKind::MseSweep => {}
        }
        if self.lmin_guard.enabled && !(self.lmin_guard.margin >= 1.0) {
            return bad("l_min guard margin must be at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    fn has_ensemble(&self) -> bool {
        self.estimators
            .iter()
            .any(|e| e.kind != EstimatorKind::PluginBaseline)
    }

    pub(crate) fn first(&self, kind: EstimatorKind) -> Option<&EstimatorEntry> {
        self.estimators.iter().find(|e| e.kind == kind)
    }
}
