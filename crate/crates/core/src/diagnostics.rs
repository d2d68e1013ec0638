//! Density estimates on grids, L1 distances, early-rejection efficiency,
//! Gelman–Rubin, and the exact ABC posterior of the toy mixture model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ParamVector;
use crate::error::{invalid, Error, Result};
use crate::mcmc::{IterationRecord, Outcome};
use crate::simulators::{TOY_COMPONENT_VAR, TOY_OBSERVATION};
use crate::stats::norm_cdf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityOnGrid {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn trapezoid(grid: &[f64], values: impl Fn(usize) -> f64) -> f64 {
    (1..grid.len())
        .map(|i| 0.5 * (grid[i] - grid[i - 1]) * (values(i) + values(i - 1)))
        .sum()
}

impl DensityOnGrid {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return invalid("density needs at least two grid points and one value per point");
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
            return invalid("grid must be finite and strictly increasing");
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("density values must be finite and nonnegative");
        }
        Ok(Self { grid, values })
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, |i| self.values[i])
    }

    /// Rescales to unit trapezoid integral.
    pub fn normalized(mut self) -> Result<Self> {
        let z = self.integral();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::NumericalFailure(format!("cannot normalize density with mass {z}")));
        }
        self.values.iter_mut().for_each(|v| *v /= z);
        Ok(self)
    }

    /// Trapezoid mass of `[lo, hi)` restricted to grid cells fully inside.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        (1..self.grid.len())
            .filter(|&i| self.grid[i - 1] >= lo && self.grid[i] <= hi)
            .map(|i| 0.5 * (self.grid[i] - self.grid[i - 1]) * (self.values[i] + self.values[i - 1]))
            .sum()
    }
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimate {
    pub density: DensityOnGrid,
    pub bandwidth: f64,
    /// All samples were identical; `density` is a spike at the grid point
    /// nearest to them.
    pub point_mass: bool,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// `1.06 sd n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    1.06 * mean_sd(samples).1 * (samples.len() as f64).powf(-0.2)
}

/// Gaussian kernel density estimate evaluated on `grid`; Silverman's rule
/// when `bandwidth` is `None`.
pub fn kde_density(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<KdeEstimate> {
    if samples.len() < 2 {
        return invalid("kde needs at least two samples");
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return invalid("kde samples must be finite");
    }
    if samples.iter().all(|s| *s == samples[0]) {
        log::warn!("all {} samples equal {}; returning a point mass", samples.len(), samples[0]);
        let x = samples[0];
        let i = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut values = vec![0.0; grid.len()];
        let n = grid.len();
        let width = if i == 0 {
            grid[1] - grid[0]
        } else if i == n - 1 {
            grid[n - 1] - grid[n - 2]
        } else {
            grid[i + 1] - grid[i - 1]
        };
        values[i] = 2.0 / width;
        return Ok(KdeEstimate {
            density: DensityOnGrid::new(grid.to_vec(), values)?,
            bandwidth: 0.0,
            point_mass: true,
        });
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(samples));
    if !(h > 0.0 && h.is_finite()) {
        return invalid(format!("bandwidth must be positive, got {h}"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reach = 8.0 * h;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let lo = sorted.partition_point(|s| *s < x - reach);
            let hi = sorted.partition_point(|s| *s <= x + reach);
            let s: f64 = sorted[lo..hi]
                .iter()
                .map(|s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum();
            s * norm
        })
        .collect();
    Ok(KdeEstimate {
        density: DensityOnGrid::new(grid.to_vec(), values)?,
        bandwidth: h,
        point_mass: false,
    })
}

/// Trapezoid integral of `|f - g|` on a shared grid.
pub fn l1_distance(f: &DensityOnGrid, g: &DensityOnGrid) -> Result<f64> {
    if f.grid != g.grid {
        return invalid("densities live on different grids");
    }
    Ok(trapezoid(&f.grid, |i| (f.values[i] - g.values[i]).abs()))
}

pub const DEFAULT_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleL1 {
    pub l1: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    pub bandwidth_a: f64,
    pub bandwidth_b: f64,
}

/// L1 distance between the KDEs of two sample sets on a common grid that
/// spans both ranges plus three bandwidths.
pub fn l1_between_samples(a: &[f64], b: &[f64], grid_points: usize) -> Result<SampleL1> {
    let ha = silverman_bandwidth(a);
    let hb = silverman_bandwidth(b);
    let pad = 3.0 * ha.max(hb);
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min) - pad;
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max) + pad;
    let grid = linspace(lo, hi, grid_points);
    let fa = kde_density(a, &grid, None)?;
    let fb = kde_density(b, &grid, None)?;
    Ok(SampleL1 {
        l1: l1_distance(&fa.density, &fb.density)?,
        grid_lo: lo,
        grid_hi: hi,
        grid_points,
        bandwidth_a: fa.bandwidth,
        bandwidth_b: fb.bandwidth,
    })
}

/// Coordinate `j` of every sample.
pub fn marginal(samples: &[ParamVector], j: usize) -> Vec<f64> {
    samples.iter().map(|s| s[j]).collect()
}

/// Iteration counters of a sampler trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffSummary {
    pub n_iter: usize,
    pub n_early1: usize,
    pub n_early2: usize,
    pub n_sim_reject: usize,
    pub n_accept: usize,
    pub n_sim: usize,
    /// Surrogate predictions made.
    pub n_pre: usize,
    pub n_failed: usize,
}

impl EffSummary {
    pub fn from_trace(trace: &[IterationRecord]) -> Self {
        let mut s = Self {
            n_iter: trace.len(),
            ..Self::default()
        };
        for r in trace {
            match r.outcome {
                Outcome::EarlyRejectStage1 => s.n_early1 += 1,
                Outcome::EarlyRejectStage2 => s.n_early2 += 1,
                Outcome::SimReject => s.n_sim_reject += 1,
                Outcome::Accept => s.n_accept += 1,
            }
            s.n_sim += usize::from(r.sim);
            s.n_pre += usize::from(r.h.is_some());
            s.n_failed += usize::from(r.failed);
        }
        s
    }

    pub fn n_early(&self) -> usize {
        self.n_early1 + self.n_early2
    }

    /// Early rejections over all rejections; 0 when nothing was rejected.
    pub fn efficiency(&self) -> f64 {
        let rejected = self.n_early() + self.n_sim_reject;
        if rejected == 0 {
            0.0
        } else {
            self.n_early() as f64 / rejected as f64
        }
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            n_iter: self.n_iter + other.n_iter,
            n_early1: self.n_early1 + other.n_early1,
            n_early2: self.n_early2 + other.n_early2,
            n_sim_reject: self.n_sim_reject + other.n_sim_reject,
            n_accept: self.n_accept + other.n_accept,
            n_sim: self.n_sim + other.n_sim,
            n_pre: self.n_pre + other.n_pre,
            n_failed: self.n_failed + other.n_failed,
        }
    }
}

pub fn efficiency(trace: &[IterationRecord]) -> f64 {
    EffSummary::from_trace(trace).efficiency()
}

/// Potential scale reduction factor
/// `sqrt(((n - 1) / n W + B / n) / W)` of equal-length chains.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return invalid("gelman-rubin needs at least two chains");
    }
    let n = chains[0].len();
    if n < 10 || chains.iter().any(|c| c.len() != n) {
        return invalid("chains must have equal length >= 10");
    }
    psrf(chains)
}

fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let n = chains[0].len();
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| {
        let (mean, sd) = mean_sd(c);
        (mean, sd * sd)
    }).collect();
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let nf = n as f64;
    let b = nf / (m as f64 - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    if !(w > 0.0) {
        return Err(Error::UndefinedStatistic("zero within-chain variance".into()));
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok((var_plus / w).sqrt())
}

/// `P(|x - y0| <= eps | theta)` for the toy mixture with `y0 = 1`.
pub fn toy_abc_likelihood(theta: f64, eps: f64) -> f64 {
    let s = TOY_COMPONENT_VAR.sqrt();
    let y = TOY_OBSERVATION;
    let component = |mean: f64| norm_cdf((y + eps - mean) / s) - norm_cdf((y - eps - mean) / s);
    0.5 * component(theta + 2.0) + 0.5 * component(theta - 1.0)
}

/// Exact uniform-kernel ABC posterior of the toy model under the
/// `U(-6, 6)` prior, normalized on `grid`.
pub fn toy_posterior_oracle(grid: &[f64], eps: f64) -> Result<DensityOnGrid> {
    if !(eps > 0.0) {
        return invalid(format!("tolerance must be positive, got {eps}"));
    }
    let values = grid
        .iter()
        .map(|&t| {
            if (-6.0..=6.0).contains(&t) {
                if eps == f64::INFINITY {
                    1.0
                } else {
                    toy_abc_likelihood(t, eps)
                }
            } else {
                0.0
            }
        })
        .collect();
    DensityOnGrid::new(grid.to_vec(), values)?.normalized()
}

/// Normalized `exp(f)` on `grid` for a log density `f`.
pub fn density_from_log(grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<DensityOnGrid> {
    let logs = grid.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::NumericalFailure("log density is -inf on the whole grid".into()));
    }
    let values = logs.iter().map(|l| (l - top).exp()).collect();
    DensityOnGrid::new(grid.to_vec(), values)?.normalized()
}
