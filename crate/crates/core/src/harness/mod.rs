//! Seeded Monte Carlo experiments over (density case, d, N) cells.
//!
//! Trial `k` of cell `c` draws its samples from streams keyed by
//! `(seed, c, k)`, so results do not depend on scheduling. Trials run on a
//! rayon pool and are merged in `(cell, trial)` order.

mod config;
mod output;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    DensityCase, EstimatorEntry, ExperimentConfig, ExperimentKind, GaussianCase, LSet, LminGuard,
};
pub use output::{write_outputs, ExperimentReport};

use crate::distributions::{tg_sample_with, true_divergence, TruncatedGaussianSpec};
use crate::ensemble::{EtaPolicy, WeightSolution};
use crate::error::{OdinError, Result};
use crate::estimator::{
    combine, data_l_min, l_for_radius, raise_l_values, EnsembleConfig, EstimatorKind, PluginTable,
    WeightCache,
};
use crate::kernel::positivity_radius;
use crate::rng::{stream, trial_stream, StreamRole};
use crate::stats::{loglog_slope, mse_and_se, qq_points, MseSummary, QqData};

/// One (density case, d, N) combination with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub index: usize,
    pub density: String,
    pub dim: usize,
    pub n: usize,
    pub truth: f64,
    pub truth_tolerance: f64,
}

/// One output column of a cell: an ensemble estimate or one plug-in
/// bandwidth of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub label: String,
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostics {
    pub estimator: String,
    /// `[min ℒ, max ℒ]` after the `l_min` guard.
    pub l_range: (f64, f64),
    pub epsilon: f64,
    pub norm_sq: f64,
    pub eta: Option<f64>,
}

/// Raw estimates of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRun {
    pub info: CellInfo,
    pub columns: Vec<Column>,
    /// `(trial, values aligned with columns)` for each successful trial.
    pub trials: Vec<(usize, Vec<f64>)>,
    pub failed_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    pub weights: Vec<WeightDiagnostics>,
    /// Trials whose own `l_min` forced a further raise of some `ℒ`.
    pub lmin_fallbacks: usize,
}

impl CellRun {
    pub fn column_values(&self, k: usize) -> Vec<f64> {
        self.trials.iter().map(|(_, v)| v[k]).collect()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.label == label)
    }

    pub fn completed(&self) -> bool {
        self.failed_trials == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunData {
    pub trials: usize,
    pub cells: Vec<CellRun>,
    /// Weight problems actually solved (one per cell and ensemble).
    pub weight_solves: usize,
}

impl RunData {
    pub fn complete(&self) -> bool {
        self.cells.iter().all(CellRun::completed)
    }
}

#[derive(Debug, Clone)]
enum Member {
    Ensemble {
        label: String,
        config: EnsembleConfig,
    },
    Sweep {
        label: String,
        config: EnsembleConfig,
    },
}

impl Member {
    fn from_entry(e: &EstimatorEntry, cfg: &ExperimentConfig) -> Self {
        let config = e.config(cfg.functional, cfg.ensemble_size);
        match e.kind {
            EstimatorKind::PluginBaseline => Member::Sweep {
                label: e.label(),
                config,
            },
            _ => Member::Ensemble {
                label: e.label(),
                config,
            },
        }
    }
}

struct PreparedMember {
    columns: Vec<Column>,
    config: EnsembleConfig,
    hs: Vec<f64>,
    weights: Option<Arc<WeightSolution>>,
}

/// Stream tag separating pilot draws from trial draws.
const PILOT_TAG: u64 = 0x0050_494c_4f54;

fn draw_pair(
    (p, q): &(TruncatedGaussianSpec, TruncatedGaussianSpec),
    n: usize,
    mut r1: impl rand::Rng,
    mut r2: impl rand::Rng,
) -> Result<(crate::sample::SampleSet, crate::sample::SampleSet)> {
    Ok((tg_sample_with(p, n, &mut r1)?, tg_sample_with(q, n, &mut r2)?))
}

/// Largest positivity radius over the pilot draws of a cell.
fn pilot_radius(
    cfg: &ExperimentConfig,
    cell: &CellInfo,
    specs: &(TruncatedGaussianSpec, TruncatedGaussianSpec),
) -> Result<f64> {
    let c = cell.index as u64;
    let mut worst = 0.0f64;
    for k in 0..cfg.lmin_guard.pilots as u64 {
        let (s1, s2) = draw_pair(
            specs,
            cell.n,
            stream(cfg.seed, &[c, PILOT_TAG, k, StreamRole::F1 as u64]),
            stream(cfg.seed, &[c, PILOT_TAG, k, StreamRole::F2 as u64]),
        )?;
        let (_, r) = positivity_radius(&s1, &s2, cfg.functional.needs_positive_f1())?;
        worst = worst.max(r);
    }
    Ok(worst)
}

fn sweep_label(label: &str, l: f64) -> String {
    format!("{label}@l={l}")
}

type DensityPair = (TruncatedGaussianSpec, TruncatedGaussianSpec);

fn cells(cfg: &ExperimentConfig) -> Result<(Vec<CellInfo>, Vec<DensityPair>)> {
    let mut infos = Vec::new();
    let mut specs = Vec::new();
    for case in &cfg.densities {
        for &d in &cfg.dimensions {
            let p = case.f1.spec(d)?;
            let q = case.f2.spec(d)?;
            let truth = true_divergence(&cfg.functional, &p, &q, cfg.quadrature_tol)?;
            for &n in &cfg.sample_sizes {
                infos.push(CellInfo {
                    index: infos.len(),
                    density: case.name.clone(),
                    dim: d,
                    n,
                    truth: truth.value,
                    truth_tolerance: truth.tolerance,
                });
                specs.push((p.clone(), q.clone()));
            }
        }
    }
    Ok((infos, specs))
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| OdinError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every trial of every cell for the given estimator list.
fn run_members(cfg: &ExperimentConfig, members: &[Member]) -> Result<RunData> {
    cfg.validate()?;
    let (infos, specs) = cells(cfg)?;
    let trials = cfg.trials();
    let cache = WeightCache::new();

    with_pool(cfg.threads, || {
        // Weights first: one solve per (cell, ensemble), shared by all trials.
        let prepared: Vec<std::result::Result<Vec<PreparedMember>, String>> = infos
            .par_iter()
            .map(|cell| {
                prepare(cfg, cell, &specs[cell.index], members, &cache).map_err(|e| e.to_string())
            })
            .collect();

        let tasks: Vec<(usize, usize)> = (0..infos.len())
            .flat_map(|c| (0..trials).map(move |t| (c, t)))
            .collect();
        let results: Vec<std::result::Result<(Vec<f64>, usize), String>> = tasks
            .par_iter()
            .map(|&(c, t)| match &prepared[c] {
                Ok(pm) => run_trial(cfg, &infos[c], &specs[c], pm, &cache, t).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            })
            .collect();

        let mut out = Vec::with_capacity(infos.len());
        let mut it = results.into_iter();
        for (info, prep) in infos.iter().zip(&prepared) {
            let mut run = CellRun {
                info: info.clone(),
                columns: match prep {
                    Ok(pm) => pm.iter().flat_map(|m| m.columns.clone()).collect(),
                    Err(_) => Vec::new(),
                },
                trials: Vec::new(),
                failed_trials: 0,
                first_error: None,
                weights: match prep {
                    Ok(pm) => pm
                        .iter()
                        .filter_map(|m| {
                            m.weights.as_ref().map(|w| WeightDiagnostics {
                                estimator: m.columns[0].estimator.clone(),
                                l_range: (
                                    m.config.l_values[0],
                                    m.config.l_values[m.config.l_values.len() - 1],
                                ),
                                epsilon: w.epsilon,
                                norm_sq: w.norm_sq,
                                eta: w.eta,
                            })
                        })
                        .collect(),
                    Err(_) => Vec::new(),
                },
                lmin_fallbacks: 0,
            };
            for t in 0..trials {
                match it.next().expect("one result per task") {
                    Ok((v, fallbacks)) => {
                        run.trials.push((t, v));
                        run.lmin_fallbacks += usize::from(fallbacks > 0);
                    }
                    Err(e) => {
                        run.failed_trials += 1;
                        run.first_error.get_or_insert(e);
                    }
                }
            }
            out.push(run);
        }
        RunData {
            trials,
            cells: out,
            weight_solves: cache.solves(),
        }
    })
}

fn prepare(
    cfg: &ExperimentConfig,
    cell: &CellInfo,
    specs: &(TruncatedGaussianSpec, TruncatedGaussianSpec),
    members: &[Member],
    cache: &WeightCache,
) -> Result<Vec<PreparedMember>> {
    let guard = cfg.lmin_guard;
    let needs_guard = guard.enabled && members.iter().any(|m| matches!(m, Member::Ensemble { .. }));
    let radius = if needs_guard {
        Some(pilot_radius(cfg, cell, specs)?)
    } else {
        None
    };
    members
        .iter()
        .map(|m| match m {
            Member::Ensemble { label, config } => {
                let mut config = config.clone();
                if let Some(r) = radius {
                    let l_min = l_for_radius(r, config.kind, cell.n, cell.dim);
                    config.l_values = raise_l_values(&config.l_values, l_min, guard.margin);
                }
                let w = cache.get(&config, cell.n, cell.dim)?;
                Ok(PreparedMember {
                    columns: vec![Column {
                        label: label.clone(),
                        estimator: label.clone(),
                        l: None,
                    }],
                    hs: config.bandwidths(cell.n, cell.dim),
                    config,
                    weights: Some(w),
                })
            }
            Member::Sweep { label, config } => Ok(PreparedMember {
                columns: config
                    .l_values
                    .iter()
                    .map(|&l| Column {
                        label: sweep_label(label, l),
                        estimator: label.clone(),
                        l: Some(l),
                    })
                    .collect(),
                config: config.clone(),
                hs: config.bandwidths(cell.n, cell.dim),
                weights: None,
            }),
        })
        .collect()
}

/// Estimates of one trial, aligned with the cell's columns, and the number
/// of ensembles whose `ℒ` had to be raised for this trial's data.
fn run_trial(
    cfg: &ExperimentConfig,
    cell: &CellInfo,
    specs: &(TruncatedGaussianSpec, TruncatedGaussianSpec),
    members: &[PreparedMember],
    cache: &WeightCache,
    trial: usize,
) -> Result<(Vec<f64>, usize)> {
    let (c, t) = (cell.index as u64, trial as u64);
    let (s1, s2) = draw_pair(
        specs,
        cell.n,
        trial_stream(cfg.seed, c, t, StreamRole::F1),
        trial_stream(cfg.seed, c, t, StreamRole::F2),
    )?;
    let g = &cfg.functional;
    let all_hs: Vec<f64> = members.iter().flat_map(|m| m.hs.iter().copied()).collect();
    let table = PluginTable::compute(&s1, &s2, &all_hs, g)?;
    let mut values = Vec::new();
    let mut fallbacks = 0;
    for m in members {
        let l_values = &m.config.l_values;
        match &m.weights {
            Some(w) => {
                let positive = table.positive_at(m.hs[0], g).expect("tabulated");
                if positive || !cfg.lmin_guard.enabled {
                    values.push(table.weighted(l_values, &m.hs, &w.weights)?.value);
                } else {
                    fallbacks += 1;
                    let mut config = m.config.clone();
                    let l_min = data_l_min(&s1, &s2, &config)?;
                    config.l_values = raise_l_values(l_values, l_min, cfg.lmin_guard.margin);
                    let w = cache.get(&config, cell.n, cell.dim)?;
                    let hs = config.bandwidths(cell.n, cell.dim);
                    let own = PluginTable::compute(&s1, &s2, &hs, g)?;
                    values.push(own.weighted(&config.l_values, &hs, &w.weights)?.value);
                }
            }
            None => {
                for (&l, &h) in l_values.iter().zip(&m.hs) {
                    let v = table.get(h).expect("tabulated").value;
                    if !v.is_finite() {
                        return Err(OdinError::NonFiniteEstimate { l });
                    }
                    values.push(v);
                }
            }
        }
    }
    Ok((values, fallbacks))
}

/// Re-runs trial `trial` of cell `cell` in isolation.
pub fn rerun_trial(cfg: &ExperimentConfig, cell: usize, trial: usize) -> Result<Vec<f64>> {
    let members = default_members(cfg);
    let (infos, specs) = cells(cfg)?;
    let info = infos
        .get(cell)
        .ok_or_else(|| OdinError::InvalidArgument(format!("no cell {cell}")))?;
    let cache = WeightCache::new();
    let prepared = prepare(cfg, info, &specs[cell], &members, &cache)?;
    Ok(run_trial(cfg, info, &specs[cell], &prepared, &cache, trial)?.0)
}

fn default_members(cfg: &ExperimentConfig) -> Vec<Member> {
    match cfg.kind {
        ExperimentKind::MseSweep => cfg.estimators.iter().map(|e| Member::from_entry(e, cfg)).collect(),
        ExperimentKind::Clt => cfg
            .estimators
            .iter()
            .filter(|e| e.kind != EstimatorKind::PluginBaseline)
            .map(|e| Member::from_entry(e, cfg))
            .collect(),
        ExperimentKind::Rho => [EstimatorKind::Odin1, EstimatorKind::Odin2]
            .iter()
            .map(|&k| Member::from_entry(cfg.first(k).expect("validated"), cfg))
            .collect(),
        ExperimentKind::Tuning => tuning_members(cfg),
    }
}

fn tuning_members(cfg: &ExperimentConfig) -> Vec<Member> {
    let mut out = Vec::new();
    for e in cfg.estimators.iter().filter(|e| e.kind != EstimatorKind::PluginBaseline) {
        let base = e.config(cfg.functional, cfg.ensemble_size);
        let size = base.ensemble_size();
        for set in &cfg.l_sets {
            let (lo, hi) = set.range(e.kind.rule());
            let mut c = EnsembleConfig::with_range(e.kind, cfg.functional, lo, hi, size);
            c.eta = base.eta;
            c.lambda = base.lambda;
            out.push(Member::Ensemble {
                label: format!("{}/{}", e.label(), set.name),
                config: c,
            });
        }
        for &eta in &cfg.etas {
            let (lo, hi) = cfg.eta_l_range;
            let mut c = EnsembleConfig::with_range(e.kind, cfg.functional, lo, hi, size);
            c.eta = EtaPolicy::Fixed(eta);
            c.lambda = base.lambda;
            out.push(Member::Ensemble {
                label: format!("{}/eta={eta}", e.label()),
                config: c,
            });
        }
    }
    out
}

/// MSE summary of one output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStat {
    pub label: String,
    pub summary: MseSummary,
}

/// The plug-in bandwidth with the smallest MSE in a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBest {
    pub l: f64,
    pub summary: MseSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoBest {
    pub rho: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCell {
    pub info: CellInfo,
    pub completed_trials: usize,
    pub failed_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    pub estimators: Vec<ColumnStat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelBest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined: Option<RhoBest>,
    pub weights: Vec<WeightDiagnostics>,
}

impl MseCell {
    pub fn mse(&self, label: &str) -> Option<f64> {
        match label {
            "kernel" => self.kernel.as_ref().map(|k| k.summary.mse),
            "combined" => self.combined.as_ref().map(|c| c.mse),
            _ => self
                .estimators
                .iter()
                .find(|c| c.label == label)
                .map(|c| c.summary.mse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub density: String,
    pub dim: usize,
    pub estimator: String,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseSweepReport {
    pub cells: Vec<MseCell>,
    pub slopes: Vec<Slope>,
    pub weight_solves: usize,
    pub complete: bool,
}

impl MseSweepReport {
    pub fn slope(&self, density: &str, dim: usize, estimator: &str) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.density == density && s.dim == dim && s.estimator == estimator)
            .map(|s| s.slope)
    }
}

fn best_rho(a: &[f64], b: &[f64], truth: f64, grid: &[f64]) -> Option<RhoBest> {
    let mut best: Option<RhoBest> = None;
    for &rho in grid {
        let mse = a
            .iter()
            .zip(b)
            .map(|(x, y)| (combine(*x, *y, rho) - truth).powi(2))
            .sum::<f64>()
            / a.len() as f64;
        if best.as_ref().is_none_or(|b| mse < b.mse) {
            best = Some(RhoBest { rho, mse });
        }
    }
    best
}

fn summarize_mse(cfg: &ExperimentConfig, data: &RunData) -> MseSweepReport {
    let odin1 = cfg.first(EstimatorKind::Odin1).map(|e| e.label());
    let odin2 = cfg.first(EstimatorKind::Odin2).map(|e| e.label());
    let mut cells = Vec::new();
    for run in &data.cells {
        let truth = run.info.truth;
        let mut estimators = Vec::new();
        let mut kernel: Option<KernelBest> = None;
        for (k, col) in run.columns.iter().enumerate() {
            let Ok(summary) = mse_and_se(&run.column_values(k), truth) else {
                continue;
            };
            match col.l {
                Some(l) => {
                    if kernel.as_ref().is_none_or(|b| summary.mse < b.summary.mse) {
                        kernel = Some(KernelBest { l, summary });
                    }
                }
                None => estimators.push(ColumnStat {
                    label: col.label.clone(),
                    summary,
                }),
            }
        }
        let combined = match (&odin1, &odin2) {
            (Some(a), Some(b)) if run.trials.len() >= 2 => {
                let ia = run.column_index(a);
                let ib = run.column_index(b);
                ia.zip(ib).and_then(|(ia, ib)| {
                    best_rho(&run.column_values(ia), &run.column_values(ib), truth, &cfg.rho_grid)
                })
            }
            _ => None,
        };
        cells.push(MseCell {
            info: run.info.clone(),
            completed_trials: run.trials.len(),
            failed_trials: run.failed_trials,
            first_error: run.first_error.clone(),
            estimators,
            kernel,
            combined,
            weights: run.weights.clone(),
        });
    }

    let mut labels: Vec<String> = cfg
        .estimators
        .iter()
        .filter(|e| e.kind != EstimatorKind::PluginBaseline)
        .map(|e| e.label())
        .collect();
    if cfg.first(EstimatorKind::PluginBaseline).is_some() {
        labels.push("kernel".into());
    }
    if odin1.is_some() && odin2.is_some() {
        labels.push("combined".into());
    }
    let mut slopes = Vec::new();
    if cfg.sample_sizes.len() >= 2 {
        for case in &cfg.densities {
            for &d in &cfg.dimensions {
                for label in &labels {
                    let group: Vec<&MseCell> = cells
                        .iter()
                        .filter(|c| c.info.density == case.name && c.info.dim == d)
                        .collect();
                    let pts: Option<Vec<(f64, f64)>> =
                        group.iter().map(|c| c.mse(label).map(|m| (c.info.n as f64, m))).collect();
                    if let Some(pts) = pts {
                        let (ns, ms): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
                        if let Ok(slope) = loglog_slope(&ns, &ms) {
                            slopes.push(Slope {
                                density: case.name.clone(),
                                dim: d,
                                estimator: label.clone(),
                                slope,
                            });
                        }
                    }
                }
            }
        }
    }
    MseSweepReport {
        cells,
        slopes,
        weight_solves: data.weight_solves,
        complete: data.complete(),
    }
}

pub fn run_mse_sweep(cfg: &ExperimentConfig) -> Result<(RunData, MseSweepReport)> {
    let data = run_members(cfg, &default_members(cfg))?;
    let report = summarize_mse(cfg, &data);
    Ok((data, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltEntry {
    pub estimator: String,
    pub mean: f64,
    pub sd: f64,
    pub qq: QqData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltCell {
    pub info: CellInfo,
    pub completed_trials: usize,
    pub failed_trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    pub estimators: Vec<CltEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub cells: Vec<CltCell>,
    pub weight_solves: usize,
    pub complete: bool,
}

impl CltReport {
    pub fn correlation(&self, density: &str, estimator: &str) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.info.density == density)
            .flat_map(|c| &c.estimators)
            .find(|e| e.estimator == estimator)
            .map(|e| e.qq.correlation)
    }
}

pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<(RunData, CltReport)> {
    let data = run_members(cfg, &default_members(cfg))?;
    let mut cells = Vec::new();
    let mut complete = data.complete();
    for run in &data.cells {
        let mut estimators = Vec::new();
        for (k, col) in run.columns.iter().enumerate() {
            let v = run.column_values(k);
            match (qq_points(&v), mse_and_se(&v, 0.0)) {
                (Ok(qq), Ok(s)) => estimators.push(CltEntry {
                    estimator: col.label.clone(),
                    mean: s.mean,
                    sd: s.variance.sqrt(),
                    qq,
                }),
                _ => complete = false,
            }
        }
        cells.push(CltCell {
            info: run.info.clone(),
            completed_trials: run.trials.len(),
            failed_trials: run.failed_trials,
            first_error: run.first_error.clone(),
            estimators,
        });
    }
    Ok((
        data.clone(),
        CltReport {
            cells,
            weight_solves: data.weight_solves,
            complete,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningEntry {
    pub density: String,
    pub dim: usize,
    pub n: usize,
    pub estimator: String,
    pub variant: String,
    pub summary: MseSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub grid: Vec<TuningEntry>,
    pub failed_cells: Vec<usize>,
    pub weight_solves: usize,
    pub complete: bool,
}

impl TuningReport {
    pub fn mse(&self, dim: usize, n: usize, estimator: &str, variant: &str) -> Option<f64> {
        self.grid
            .iter()
            .find(|e| e.dim == dim && e.n == n && e.estimator == estimator && e.variant == variant)
            .map(|e| e.summary.mse)
    }
}

pub fn run_tuning_sweep(cfg: &ExperimentConfig) -> Result<(RunData, TuningReport)> {
    let data = run_members(cfg, &default_members(cfg))?;
    let mut grid = Vec::new();
    let mut failed_cells = Vec::new();
    for run in &data.cells {
        if !run.completed() {
            failed_cells.push(run.info.index);
        }
        for (k, col) in run.columns.iter().enumerate() {
            let Ok(summary) = mse_and_se(&run.column_values(k), run.info.truth) else {
                continue;
            };
            let (estimator, variant) = col.label.split_once('/').unwrap_or((&col.label, ""));
            grid.push(TuningEntry {
                density: run.info.density.clone(),
                dim: run.info.dim,
                n: run.info.n,
                estimator: estimator.to_string(),
                variant: variant.to_string(),
                summary,
            });
        }
    }
    Ok((
        data.clone(),
        TuningReport {
            grid,
            failed_cells,
            weight_solves: data.weight_solves,
            complete: data.complete(),
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCell {
    pub info: CellInfo,
    pub completed_trials: usize,
    pub failed_trials: usize,
    /// `(ρ, MSE)` over the grid.
    pub mse: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<RhoBest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub cells: Vec<RhoCell>,
    pub weight_solves: usize,
    pub complete: bool,
}

pub fn run_rho_sweep(cfg: &ExperimentConfig) -> Result<(RunData, RhoReport)> {
    let data = run_members(cfg, &default_members(cfg))?;
    let mut cells = Vec::new();
    for run in &data.cells {
        let (a, b) = if run.columns.len() == 2 {
            (run.column_values(0), run.column_values(1))
        } else {
            (Vec::new(), Vec::new())
        };
        let truth = run.info.truth;
        let mse: Vec<(f64, f64)> = if a.is_empty() {
            Vec::new()
        } else {
            cfg.rho_grid
                .iter()
                .map(|&rho| {
                    let m = a
                        .iter()
                        .zip(&b)
                        .map(|(x, y)| (combine(*x, *y, rho) - truth).powi(2))
                        .sum::<f64>()
                        / a.len() as f64;
                    (rho, m)
                })
                .collect()
        };
        cells.push(RhoCell {
            info: run.info.clone(),
            completed_trials: run.trials.len(),
            failed_trials: run.failed_trials,
            best: if a.is_empty() {
                None
            } else {
                best_rho(&a, &b, truth, &cfg.rho_grid)
            },
            mse,
        });
    }
    Ok((
        data.clone(),
        RhoReport {
            cells,
            weight_solves: data.weight_solves,
            complete: data.complete(),
        },
    ))
}
