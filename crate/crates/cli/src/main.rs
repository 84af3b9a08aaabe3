use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use odin_core::distributions::{tg_sample, true_divergence, TruncatedGaussianSpec, DEFAULT_QUADRATURE_TOL};
use odin_core::ensemble::{solve_weights_exact, EtaPolicy};
use odin_core::estimator::{
    combine_results, data_l_min, odin_estimate, raise_l_values, EnsembleConfig, EstimatorKind,
    DEFAULT_ENSEMBLE_SIZE, DEFAULT_LMIN_MARGIN,
};
use odin_core::functional::{plugin_estimate, FunctionalSpec};
use odin_core::harness::{write_outputs, ExperimentConfig, ExperimentKind};
use odin_core::sample::SampleSet;
use odin_core::stats::{paired_ttest, Alternative};

#[derive(Parser)]
#[command(name = "odin", version, about = "Divergence functional estimation with optimally weighted kernel ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for ensemble weights and print them as JSON.
    Weights(WeightsArgs),
    /// Estimate a divergence functional from two CSV sample files.
    Estimate(EstimateArgs),
    /// Quadrature value of a functional between two isotropic truncated Gaussians.
    Oracle(OracleArgs),
    /// Draw samples from an isotropic truncated Gaussian on [0,1]^d as CSV.
    Sample(SampleArgs),
    /// Paired t-test between two columns of values.
    Ttest(TtestArgs),
    /// Run a Monte Carlo experiment and write CSV/JSON outputs.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct RangeArgs {
    /// Ensemble size L.
    #[arg(long = "L", default_value_t = DEFAULT_ENSEMBLE_SIZE)]
    size: usize,
    /// Smallest l; a number, or `auto` to raise the default to the data's l_min (estimate only).
    #[arg(long)]
    lmin: Option<String>,
    /// Largest l.
    #[arg(long)]
    lmax: Option<f64>,
    /// `auto` (η = ε) or `fixed:<value>`.
    #[arg(long, default_value = "auto")]
    eta: String,
    /// ODin2 λ; defaults to the smallest even integer ≥ d + 1.
    #[arg(long)]
    lambda: Option<u32>,
}

#[derive(Args)]
struct WeightsArgs {
    /// odin1 or odin2.
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    d: usize,
    #[arg(long = "n")]
    n: usize,
    #[command(flatten)]
    range: RangeArgs,
    /// Solve the equality-constrained problem instead of the relaxed one.
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// odin1, odin2, plugin or combined:rho=R.
    #[arg(long)]
    estimator: String,
    /// kl or renyi:alpha=A.
    #[arg(long, default_value = "renyi:alpha=0.5")]
    functional: String,
    #[arg(long)]
    f1: PathBuf,
    #[arg(long)]
    f2: PathBuf,
    #[command(flatten)]
    range: RangeArgs,
    /// Plug-in bandwidth h (plugin only).
    #[arg(long)]
    h: Option<f64>,
    /// Plug-in bandwidth parameter l under the ODin2 rule (plugin only).
    #[arg(long)]
    l: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "renyi:alpha=0.5")]
    functional: String,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    mu2: f64,
    /// Per-coordinate variance shared by both densities.
    #[arg(long)]
    var: f64,
    /// Variance of f2 when it differs from `--var`.
    #[arg(long)]
    var2: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_QUADRATURE_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    d: usize,
    #[arg(long = "n")]
    n: usize,
    #[arg(long)]
    mu: f64,
    #[arg(long)]
    var: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TtestArgs {
    /// Single-column file of values (optional header).
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// two-sided, greater (a > b) or less (a < b).
    #[arg(long)]
    alternative: String,
}

#[derive(Args)]
struct ExperimentArgs {
    /// mse-sweep, clt, tuning or rho.
    kind: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn parse_kind(s: &str) -> Result<EstimatorKind> {
    let kind: EstimatorKind = s.parse()?;
    Ok(kind)
}

fn ensemble_config(
    kind: EstimatorKind,
    g: FunctionalSpec,
    range: &RangeArgs,
    lmin: Option<f64>,
) -> Result<EnsembleConfig> {
    let (lo, hi) = kind.rule().default_l_range();
    let mut c = EnsembleConfig::with_range(
        kind,
        g,
        lmin.unwrap_or(lo),
        range.lmax.unwrap_or(hi),
        range.size,
    );
    c.eta = range.eta.parse::<EtaPolicy>()?;
    c.lambda = range.lambda;
    c.validate()?;
    Ok(c)
}

fn fixed_lmin(range: &RangeArgs) -> Result<Option<f64>> {
    match range.lmin.as_deref() {
        None => Ok(None),
        Some("auto") => bail!("--lmin auto needs data; it is only accepted by `estimate`"),
        Some(v) => Ok(Some(v.parse().with_context(|| format!("--lmin `{v}`"))?)),
    }
}

fn cmd_weights(a: WeightsArgs) -> Result<()> {
    let kind = parse_kind(&a.estimator)?;
    if kind == EstimatorKind::PluginBaseline {
        bail!("the plug-in baseline has no weights");
    }
    let c = ensemble_config(kind, FunctionalSpec::renyi(0.5), &a.range, fixed_lmin(&a.range)?)?;
    let sol = if a.exact {
        let basis = c.basis(a.d)?.expect("ensemble kind");
        solve_weights_exact(&c.l_values, &basis)?
    } else {
        c.solve_weights(a.n, a.d)?
    };
    print_json(&sol)
}

fn ensemble_for_data(
    kind: EstimatorKind,
    g: FunctionalSpec,
    range: &RangeArgs,
    s1: &SampleSet,
    s2: &SampleSet,
) -> Result<EnsembleConfig> {
    if range.lmin.as_deref() == Some("auto") {
        let mut c = ensemble_config(kind, g, range, None)?;
        let l_min = data_l_min(s1, s2, &c)?;
        c.l_values = raise_l_values(&c.l_values, l_min, DEFAULT_LMIN_MARGIN);
        Ok(c)
    } else {
        ensemble_config(kind, g, range, fixed_lmin(range)?)
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    let g: FunctionalSpec = a.functional.parse()?;
    let s1 = SampleSet::read_csv_path(&a.f1).with_context(|| format!("reading {}", a.f1.display()))?;
    let s2 = SampleSet::read_csv_path(&a.f2).with_context(|| format!("reading {}", a.f2.display()))?;

    if let Some(rho) = a.estimator.strip_prefix("combined:") {
        let rho: f64 = rho
            .strip_prefix("rho=")
            .ok_or_else(|| anyhow!("expected combined:rho=R"))?
            .parse()
            .context("rho")?;
        let c1 = ensemble_for_data(EstimatorKind::Odin1, g, &a.range, &s1, &s2)?;
        let c2 = ensemble_for_data(EstimatorKind::Odin2, g, &a.range, &s1, &s2)?;
        let (r1, _) = odin_estimate(&s1, &s2, &c1)?;
        let (r2, _) = odin_estimate(&s1, &s2, &c2)?;
        return print_json(&combine_results(&r1, &r2, rho)?);
    }

    let kind = parse_kind(&a.estimator)?;
    if kind == EstimatorKind::PluginBaseline {
        let h = match (a.h, a.l) {
            (Some(h), None) => h,
            (None, Some(l)) => kind.rule().bandwidth(l, s2.len(), s2.dim()),
            _ => bail!("plugin needs exactly one of --h or --l"),
        };
        return print_json(&plugin_estimate(&s1, &s2, h, h, &g)?);
    }
    let c = ensemble_for_data(kind, g, &a.range, &s1, &s2)?;
    let (r, _) = odin_estimate(&s1, &s2, &c)?;
    print_json(&r)
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    let g: FunctionalSpec = a.functional.parse()?;
    let p = TruncatedGaussianSpec::isotropic(a.d, a.mu1, a.var)?;
    let q = TruncatedGaussianSpec::isotropic(a.d, a.mu2, a.var2.unwrap_or(a.var))?;
    print_json(&true_divergence(&g, &p, &q, a.tol)?)
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let spec = TruncatedGaussianSpec::isotropic(a.d, a.mu, a.var)?;
    let s = tg_sample(&spec, a.n, a.seed)?;
    match a.out {
        Some(path) => s.write_csv(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?)?,
        None => s.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn cmd_ttest(a: TtestArgs) -> Result<()> {
    let alt: Alternative = a.alternative.parse()?;
    let x = read_column(&a.a)?;
    let y = read_column(&a.b)?;
    print_json(&paired_ttest(&x, &y, alt)?)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<bool> {
    let kind: ExperimentKind = a.kind.parse()?;
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut v: serde_json::Value = serde_json::from_str(&text)?;
            // The subcommand names the experiment; a config may omit `kind`.
            if let Some(obj) = v.as_object_mut() {
                obj.insert("kind".into(), serde_json::to_value(kind)?);
            }
            serde_json::from_value::<ExperimentConfig>(v)?
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(t) = a.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = Some(t);
    }
    let report = write_outputs(&cfg, &a.out)?;
    let complete = report.complete();
    if !complete {
        eprintln!("some cells did not complete all trials; see {}", a.out.join("summary.json").display());
    }
    Ok(complete)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Weights(a) => cmd_weights(a)?,
        Command::Estimate(a) => cmd_estimate(a)?,
        Command::Oracle(a) => cmd_oracle(a)?,
        Command::Sample(a) => cmd_sample(a)?,
        Command::Ttest(a) => cmd_ttest(a)?,
        Command::Experiment(a) => return cmd_experiment(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
