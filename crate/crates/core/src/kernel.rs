//! Uniform product-kernel density estimation.
//!
//! The kernel is the indicator of the centred unit hypercube, so
//! `K((x - s) / h)` is 1 exactly when the Chebyshev distance between `x`
//! and `s` is at most `h / 2`. Density estimates are therefore in-box
//! counts divided by `n_eff * h^d`. Distances are computed once per
//! (eval set, sample set) pair and thresholded for every bandwidth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OdinError, Result};
use crate::sample::SampleSet;

/// Symmetric product kernel. Only the uniform (box) kernel is supported.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSpec {
    #[default]
    UniformProduct,
}

impl KernelSpec {
    /// Per-coordinate support half-width of the unscaled kernel.
    pub fn half_width(&self) -> f64 {
        match self {
            KernelSpec::UniformProduct => 0.5,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        1.0
    }

    /// Evaluates `K(u)`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            KernelSpec::UniformProduct => {
                if u.iter().all(|c| c.abs() <= 0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Support radius (in Chebyshev distance) at bandwidth `h`.
    pub fn radius(&self, h: f64) -> f64 {
        h * self.half_width()
    }
}

#[inline]
pub(crate) fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Returns `h^d`, failing when it underflows to zero or a subnormal.
pub fn bandwidth_volume(h: f64, d: usize) -> Result<f64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(OdinError::InvalidArgument(format!(
            "bandwidth must be positive and finite, got {h}"
        )));
    }
    let vol = h.powi(d as i32);
    if !vol.is_normal() {
        return Err(OdinError::DegenerateBandwidth { h, d });
    }
    Ok(vol)
}

/// `count / (n_eff * h^d)`. Every KDE path in the crate goes through here
/// so cached and naive evaluations agree bit for bit.
#[inline]
pub fn density_from_count(count: u32, n_effective: usize, volume: f64) -> f64 {
    count as f64 / (n_effective as f64 * volume)
}

/// Eval-to-sample Chebyshev distances, row-major `M x N`.
#[derive(Debug, Clone)]
pub struct DistanceCache {
    evals: usize,
    samples: usize,
    dim: usize,
    exclude_diagonal: bool,
    dist: Vec<f64>,
}

impl DistanceCache {
    pub fn n_evals(&self) -> usize {
        self.evals
    }

    pub fn n_samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.samples + j]
    }

    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        self.exclude_diagonal && i == j
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.samples..(i + 1) * self.samples]
    }

    /// Number of non-excluded samples within Chebyshev distance `radius`
    /// of eval point `i`.
    pub fn count_within(&self, i: usize, radius: f64) -> u32 {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|&(j, &r)| r <= radius && !self.is_excluded(i, j))
            .count() as u32
    }
}

/// Computes the full eval-to-sample Chebyshev distance matrix.
///
/// With `exclude_diagonal`, pair `(i, i)` is flagged so leave-one-out
/// estimates skip it; this is meant for `evals` and `samples` being the
/// same set.
pub fn pairwise_chebyshev(
    evals: &SampleSet,
    samples: &SampleSet,
    exclude_diagonal: bool,
) -> Result<DistanceCache> {
    if evals.dim() != samples.dim() {
        return Err(OdinError::DimensionMismatch {
            expected: evals.dim(),
            found: samples.dim(),
        });
    }
    let n = samples.len();
    let mut dist = vec![0.0; evals.len() * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let x = evals.row(i);
        for (o, s) in out.iter_mut().zip(samples.rows()) {
            *o = chebyshev(x, s);
        }
    });
    Ok(DistanceCache {
        evals: evals.len(),
        samples: n,
        dim: evals.dim(),
        exclude_diagonal,
        dist,
    })
}

/// Density estimate at every eval point of `cache`.
pub fn kde_eval(
    cache: &DistanceCache,
    bandwidth: f64,
    kernel: &KernelSpec,
    n_effective: usize,
) -> Result<Vec<f64>> {
    if n_effective == 0 {
        return Err(OdinError::EmptyEffectiveSample);
    }
    let volume = bandwidth_volume(bandwidth, cache.dim)?;
    let radius = kernel.radius(bandwidth);
    Ok((0..cache.evals)
        .into_par_iter()
        .map(|i| density_from_count(cache.count_within(i, radius), n_effective, volume))
        .collect())
}

/// In-box counts for many radii at once, without materialising the
/// distance matrix. `counts[i * radii.len() + k]` is the number of
/// non-excluded samples within `radii[k]` of eval point `i`.
#[derive(Debug, Clone)]
pub struct NeighborCounts {
    radii: Vec<f64>,
    counts: Vec<u32>,
    evals: usize,
}

impl NeighborCounts {
    /// `radii` must be ascending.
    pub fn compute(
        evals: &SampleSet,
        samples: &SampleSet,
        exclude_diagonal: bool,
        radii: &[f64],
    ) -> Result<Self> {
        if evals.dim() != samples.dim() {
            return Err(OdinError::DimensionMismatch {
                expected: evals.dim(),
                found: samples.dim(),
            });
        }
        if radii.is_empty() || radii.windows(2).any(|w| w[0] > w[1]) {
            return Err(OdinError::InvalidArgument(
                "radii must be nonempty and ascending".into(),
            ));
        }
        let nr = radii.len();
        let r_max = radii[nr - 1];
        let mut counts = vec![0u32; evals.len() * nr];
        counts.par_chunks_mut(nr).enumerate().for_each(|(i, out)| {
            let x = evals.row(i);
            // hist[k]: samples whose first admitting radius is radii[k]
            let mut hist = vec![0u32; nr + 1];
            for (j, s) in samples.rows().enumerate() {
                if exclude_diagonal && i == j {
                    continue;
                }
                let mut dist = 0.0_f64;
                let mut far = false;
                for (a, b) in x.iter().zip(s) {
                    dist = dist.max((a - b).abs());
                    if dist > r_max {
                        far = true;
                        break;
                    }
                }
                if far {
                    continue;
                }
                hist[radii.partition_point(|&r| r < dist)] += 1;
            }
            let mut acc = 0u32;
            for (o, h) in out.iter_mut().zip(&hist) {
                acc += h;
                *o = acc;
            }
        });
        Ok(Self {
            radii: radii.to_vec(),
            counts,
            evals: evals.len(),
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn n_evals(&self) -> usize {
        self.evals
    }

    /// Counts at radius index `k` for every eval point.
    pub fn column(&self, k: usize) -> impl Iterator<Item = u32> + '_ {
        self.counts.iter().skip(k).step_by(self.radii.len()).copied()
    }

    pub fn get(&self, i: usize, k: usize) -> u32 {
        self.counts[i * self.radii.len() + k]
    }

    /// Index of `radius` in the radius list, by exact match.
    pub fn index_of(&self, radius: f64) -> Option<usize> {
        self.radii.iter().position(|&r| r == radius)
    }
}

/// Largest Chebyshev distance any `X_j` must reach: to its nearest other
/// sample of `f2` and, with `include_cross`, to its nearest sample of
/// `f1`. Returns `(worst index, distance)`.
pub fn positivity_radius(s1: &SampleSet, s2: &SampleSet, include_cross: bool) -> Result<(usize, f64)> {
    if s1.dim() != s2.dim() {
        return Err(OdinError::DimensionMismatch {
            expected: s2.dim(),
            found: s1.dim(),
        });
    }
    if s2.len() < 2 {
        return Err(OdinError::EmptyEffectiveSample);
    }
    let need: Vec<f64> = (0..s2.len())
        .into_par_iter()
        .map(|j| {
            let x = s2.row(j);
            let cross = if include_cross {
                s1.rows().map(|y| chebyshev(x, y)).fold(f64::INFINITY, f64::min)
            } else {
                0.0
            };
            let own = s2
                .rows()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, o)| chebyshev(x, o))
                .fold(f64::INFINITY, f64::min);
            cross.max(own)
        })
        .collect();
    let (worst, &required) = need
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("s2 is nonempty");
    Ok((worst, required))
}

/// Smallest `l` in `l_grid` (ascending) at which both the cross estimate
/// of `f1` and the leave-one-out estimate of `f2` are strictly positive at
/// every point of `s2`, under bandwidth rule `h = bandwidth_rule(l)`.
pub fn min_positive_bandwidth(
    s1: &SampleSet,
    s2: &SampleSet,
    l_grid: &[f64],
    bandwidth_rule: impl Fn(f64) -> f64,
) -> Result<f64> {
    if l_grid.is_empty() || l_grid.iter().any(|l| !(*l > 0.0)) {
        return Err(OdinError::InvalidArgument(
            "l grid must be nonempty and positive".into(),
        ));
    }
    if l_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(OdinError::InvalidArgument("l grid must be strictly ascending".into()));
    }
    let (worst, required) = positivity_radius(s1, s2, true)?;
    let kernel = KernelSpec::UniformProduct;
    l_grid
        .iter()
        .copied()
        .find(|&l| required <= kernel.radius(bandwidth_rule(l)))
        .ok_or(OdinError::GridExhausted {
            eval_index: worst,
            required,
        })
}
