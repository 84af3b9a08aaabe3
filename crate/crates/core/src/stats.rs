//! Summary statistics for Monte Carlo experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{OdinError, Result};
use crate::normal;

/// Error, bias and spread of `T` estimates of a known value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub mse: f64,
    /// Standard error of the estimate mean, `sd / √T`.
    pub se: f64,
    pub bias: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub mean: f64,
    pub trials: usize,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(OdinError::Stats(format!("{what}[{i}] is not finite")));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-pass sample variance.
fn sample_variance(values: &[f64], m: f64) -> f64 {
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn mse_and_se(estimates: &[f64], truth: f64) -> Result<MseSummary> {
    if estimates.len() < 2 {
        return Err(OdinError::Stats(format!(
            "need at least 2 trials, got {}",
            estimates.len()
        )));
    }
    check_finite(estimates, "estimates")?;
    if !truth.is_finite() {
        return Err(OdinError::Stats("truth is not finite".into()));
    }
    let t = estimates.len() as f64;
    let m = mean(estimates);
    let variance = sample_variance(estimates, m);
    let mse = estimates.iter().map(|e| (e - truth) * (e - truth)).sum::<f64>() / t;
    Ok(MseSummary {
        mse,
        se: (variance / t).sqrt(),
        bias: m - truth,
        variance,
        mean: m,
        trials: estimates.len(),
    })
}

/// Negated least-squares slope of `ln mse` against `ln N`.
pub fn loglog_slope(ns: &[f64], mses: &[f64]) -> Result<f64> {
    if ns.len() != mses.len() {
        return Err(OdinError::Stats(format!(
            "{} sample sizes but {} MSE values",
            ns.len(),
            mses.len()
        )));
    }
    if ns.iter().chain(mses).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(OdinError::Stats("sample sizes and MSEs must be positive and finite".into()));
    }
    let x: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let y: Vec<f64> = mses.iter().map(|m| m.ln()).collect();
    let mx = mean(&x);
    let my = mean(&y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if !(sxx > 0.0) {
        return Err(OdinError::Stats("need at least two distinct sample sizes".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(-(sxy / sxx))
}

/// Normal Q-Q data for a studentized sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqData {
    /// `(Φ⁻¹((k − ½)/T), k-th smallest studentized value)`.
    pub points: Vec<(f64, f64)>,
    pub correlation: f64,
}

pub fn qq_points(values: &[f64]) -> Result<QqData> {
    if values.len() < 10 {
        return Err(OdinError::Stats(format!(
            "Q-Q data needs at least 10 values, got {}",
            values.len()
        )));
    }
    check_finite(values, "values")?;
    let m = mean(values);
    let sd = sample_variance(values, m).sqrt();
    if !(sd > 0.0) {
        return Err(OdinError::Stats("sample standard deviation is zero".into()));
    }
    let mut z: Vec<f64> = values.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let t = values.len() as f64;
    let points: Vec<(f64, f64)> = z
        .iter()
        .enumerate()
        .map(|(k, &v)| (normal::inv_cdf((k as f64 + 0.5) / t), v))
        .collect();
    let correlation = pearson(&points);
    Ok(QqData {
        points,
        correlation,
    })
}

fn pearson(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
    /// Mean of `a − b` is positive.
    Greater,
    /// Mean of `a − b` is negative.
    Less,
}

impl std::str::FromStr for Alternative {
    type Err = OdinError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Self::TwoSided),
            "greater" | "a>b" => Ok(Self::Greater),
            "less" | "a<b" => Ok(Self::Less),
            _ => Err(OdinError::Parse(format!(
                "unknown alternative '{s}' (expected two-sided, greater or less)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: usize,
}

/// Paired t-test on `a − b`.
///
/// All-zero differences give `t = 0, p = 1`. Constant nonzero
/// differences give `t = ±∞` and the limiting p-value.
pub fn paired_ttest(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(OdinError::Stats(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(OdinError::Stats("paired t-test needs at least 2 pairs".into()));
    }
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let df = diffs.len() - 1;
    let m = mean(&diffs);
    let var = sample_variance(&diffs, m);
    if var == 0.0 {
        if m == 0.0 {
            return Ok(TTest {
                t: 0.0,
                p_value: 1.0,
                df,
            });
        }
        let t = if m > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        let p_value = match alternative {
            Alternative::TwoSided => 0.0,
            Alternative::Greater => f64::from(u8::from(m < 0.0)),
            Alternative::Less => f64::from(u8::from(m > 0.0)),
        };
        return Ok(TTest { t, p_value, df });
    }
    let t = m / (var / diffs.len() as f64).sqrt();
    let p_value = t_pvalue(t, df as f64, alternative)?;
    Ok(TTest { t, p_value, df })
}

fn t_pvalue(t: f64, df: f64, alternative: Alternative) -> Result<f64> {
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| OdinError::Stats(e.to_string()))?;
    // Evaluate each tail directly to avoid 1 − cdf cancellation.
    let upper = |x: f64| dist.sf(x);
    Ok(match alternative {
        Alternative::TwoSided => (2.0 * upper(t.abs())).min(1.0),
        Alternative::Greater => upper(t),
        Alternative::Less => dist.cdf(t),
    })
}

/// Estimates for `T` trials over `C` configuration cells, row-major by trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMatrix {
    pub cells: Vec<CellInfo>,
    pub trials: usize,
    estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub estimator: String,
    pub dim: usize,
    pub n: usize,
    pub functional: String,
    pub truth: f64,
}

impl TrialMatrix {
    pub fn new(cells: Vec<CellInfo>, trials: usize, estimates: Vec<f64>) -> Result<Self> {
        if trials == 0 {
            return Err(OdinError::Stats("trial matrix needs at least one trial".into()));
        }
        if estimates.len() != trials * cells.len() {
            return Err(OdinError::Stats(format!(
                "expected {} x {} estimates, got {}",
                trials,
                cells.len(),
                estimates.len()
            )));
        }
        check_finite(&estimates, "estimates")?;
        Ok(Self {
            cells,
            trials,
            estimates,
        })
    }

    pub fn get(&self, trial: usize, cell: usize) -> f64 {
        self.estimates[trial * self.cells.len() + cell]
    }

    pub fn column(&self, cell: usize) -> Vec<f64> {
        (0..self.trials).map(|t| self.get(t, cell)).collect()
    }

    pub fn summary(&self, cell: usize) -> Result<MseSummary> {
        mse_and_se(&self.column(cell), self.cells[cell].truth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_and_offset() {
        let s = mse_and_se(&[2.0; 5], 2.0).unwrap();
        assert_eq!(s.mse, 0.0);
        let s = mse_and_se(&[2.5; 5], 2.0).unwrap();
        assert!((s.mse - 0.25).abs() < 1e-15);
        assert_eq!(s.variance, 0.0);
        assert!(mse_and_se(&[1.0], 1.0).is_err());
    }

    #[test]
    fn slope_of_exact_lines() {
        let ns = [100.0, 240.0, 560.0, 1330.0];
        let inv: Vec<f64> = ns.iter().map(|n| 3.0 / n).collect();
        assert!((loglog_slope(&ns, &inv).unwrap() - 1.0).abs() < 1e-12);
        assert!(loglog_slope(&ns, &[0.5; 4]).unwrap().abs() < 1e-12);
        assert!(loglog_slope(&ns, &[0.5, 0.0, 1.0, 1.0]).is_err());
        assert!(loglog_slope(&[5.0, 5.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ttest_textbook_instance() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [0.0; 5];
        let r = paired_ttest(&a, &b, Alternative::TwoSided).unwrap();
        let t = 3.0 / (2.5f64.sqrt() / 5f64.sqrt());
        assert!((r.t - t).abs() < 1e-12);
        // Student-t with 4 df has a closed-form distribution function.
        let u = t * t / 4.0;
        let cdf = 0.5 + 0.375 * (t / (1.0 + u).sqrt()) * (1.0 - t * t / (12.0 * (1.0 + u)));
        assert!((r.p_value - 2.0 * (1.0 - cdf)).abs() < 1e-10);
    }

    #[test]
    fn ttest_degenerate_conventions() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(paired_ttest(&a, &a, Alternative::TwoSided).unwrap().p_value, 1.0);
        let b = [0.0, 1.0, 2.0];
        let r = paired_ttest(&a, &b, Alternative::Greater).unwrap();
        assert_eq!(r.t, f64::INFINITY);
        assert_eq!(r.p_value, 0.0);
        assert_eq!(paired_ttest(&a, &b, Alternative::Less).unwrap().p_value, 1.0);
    }

    #[test]
    fn qq_requires_spread() {
        assert!(qq_points(&[1.0; 12]).is_err());
        assert!(qq_points(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn trial_matrix_layout() {
        let cell = |e: &str| CellInfo {
            estimator: e.into(),
            dim: 1,
            n: 10,
            functional: "kl".into(),
            truth: 0.0,
        };
        let m = TrialMatrix::new(vec![cell("a"), cell("b")], 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.column(1), vec![2., 4., 6.]);
        assert!(TrialMatrix::new(vec![cell("a")], 0, vec![]).is_err());
    }
}
