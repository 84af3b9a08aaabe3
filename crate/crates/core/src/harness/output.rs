use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{
    run_clt_experiment, run_mse_sweep, run_rho_sweep, run_tuning_sweep, CltReport,
    ExperimentConfig, ExperimentKind, MseSweepReport, RhoReport, RunData, TuningReport,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentReport {
    MseSweep(MseSweepReport),
    Clt(CltReport),
    Tuning(TuningReport),
    Rho(RhoReport),
}

impl ExperimentReport {
    /// True when every cell finished all its trials.
    pub fn complete(&self) -> bool {
        match self {
            ExperimentReport::MseSweep(r) => r.complete,
            ExperimentReport::Clt(r) => r.complete,
            ExperimentReport::Tuning(r) => r.complete,
            ExperimentReport::Rho(r) => r.complete,
        }
    }
}

fn write_trials(path: &Path, data: &RunData) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell", "density", "d", "n", "trial", "estimator", "l", "estimate"])?;
    for run in &data.cells {
        let info = &run.info;
        for (t, values) in &run.trials {
            for (col, v) in run.columns.iter().zip(values) {
                w.write_record([
                    info.index.to_string(),
                    info.density.clone(),
                    info.dim.to_string(),
                    info.n.to_string(),
                    t.to_string(),
                    col.estimator.clone(),
                    col.l.map(|l| l.to_string()).unwrap_or_default(),
                    v.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_mse(path: &Path, r: &MseSweepReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell", "density", "d", "n", "estimator", "l", "truth", "mean", "mse", "se", "bias", "variance"])?;
    for c in &r.cells {
        let i = &c.info;
        let mut rows: Vec<(String, String, &crate::stats::MseSummary)> = c
            .estimators
            .iter()
            .map(|e| (e.label.clone(), String::new(), &e.summary))
            .collect();
        if let Some(k) = &c.kernel {
            rows.push(("kernel".into(), k.l.to_string(), &k.summary));
        }
        for (label, l, s) in rows {
            w.write_record([
                i.index.to_string(),
                i.density.clone(),
                i.dim.to_string(),
                i.n.to_string(),
                label,
                l,
                i.truth.to_string(),
                s.mean.to_string(),
                s.mse.to_string(),
                s.se.to_string(),
                s.bias.to_string(),
                s.variance.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_qq(path: &Path, r: &CltReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell", "density", "d", "n", "estimator", "k", "theoretical", "empirical"])?;
    for c in &r.cells {
        for e in &c.estimators {
            for (k, (x, y)) in e.qq.points.iter().enumerate() {
                w.write_record([
                    c.info.index.to_string(),
                    c.info.density.clone(),
                    c.info.dim.to_string(),
                    c.info.n.to_string(),
                    e.estimator.clone(),
                    k.to_string(),
                    x.to_string(),
                    y.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_grid(path: &Path, r: &TuningReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["density", "d", "n", "estimator", "variant", "mean", "mse", "se"])?;
    for e in &r.grid {
        w.write_record([
            e.density.clone(),
            e.dim.to_string(),
            e.n.to_string(),
            e.estimator.clone(),
            e.variant.clone(),
            e.summary.mean.to_string(),
            e.summary.mse.to_string(),
            e.summary.se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_rho(path: &Path, r: &RhoReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["cell", "density", "d", "n", "rho", "mse"])?;
    for c in &r.cells {
        for (rho, mse) in &c.mse {
            w.write_record([
                c.info.index.to_string(),
                c.info.density.clone(),
                c.info.dim.to_string(),
                c.info.n.to_string(),
                rho.to_string(),
                mse.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the configured experiment and writes `trials.csv`, a per-kind
/// table and `summary.json` into `out_dir`.
pub fn write_outputs(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let (data, report) = match cfg.kind {
        ExperimentKind::MseSweep => {
            let (d, r) = run_mse_sweep(cfg)?;
            write_mse(&out_dir.join("mse.csv"), &r)?;
            (d, ExperimentReport::MseSweep(r))
        }
        ExperimentKind::Clt => {
            let (d, r) = run_clt_experiment(cfg)?;
            write_qq(&out_dir.join("qq.csv"), &r)?;
            (d, ExperimentReport::Clt(r))
        }
        ExperimentKind::Tuning => {
            let (d, r) = run_tuning_sweep(cfg)?;
            write_grid(&out_dir.join("grid.csv"), &r)?;
            (d, ExperimentReport::Tuning(r))
        }
        ExperimentKind::Rho => {
            let (d, r) = run_rho_sweep(cfg)?;
            write_rho(&out_dir.join("rho.csv"), &r)?;
            (d, ExperimentReport::Rho(r))
        }
    };
    write_trials(&out_dir.join("trials.csv"), &data)?;
    let summary = serde_json::json!({
        "config": cfg,
        "lmin_fallbacks": data.cells.iter().map(|c| c.lmin_fallbacks).sum::<usize>(),
        "report": &report,
    });
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(report)
}
