//! Gaussian-process regression of the discrepancy on the parameters.
//!
//! The surrogate uses a constant mean and a squared-exponential covariance
//! with one lengthscale per input dimension:
//!
//! ```text
//! k(x, x') = s_f^2 exp(-1/2 sum_d ((x_d - x'_d) / l_d)^2)
//! ```
//!
//! on per-dimension standardized inputs. Hyperparameters maximize the log
//! marginal likelihood with multi-start Nelder–Mead in log space. The
//! fitted model exposes the predictive mean and latent variance, the
//! quantile prediction `h_a` used for early rejection, and the GP-ABC
//! posterior density `pi(theta) Phi((eps - mu) / sqrt(v + sigma^2))`.

mod linalg;
mod nelder_mead;
mod training;

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ParamVector;
use crate::error::{invalid, Error, Result};
use crate::model::{AbcModel, DiscrepancyBound};
use crate::prior::{Prior, PriorSpec};
use crate::rng::RngStream;
use crate::stats::{ln_norm_cdf, norm_ppf};

use linalg::PackedCholesky;
use nelder_mead::NelderMead;
pub use training::DiscrepancySet;

pub const MIN_TRAINING_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanSpec {
    /// Constant equal to the mean of the (transformed) targets.
    Constant,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    Fitted,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub mean: MeanSpec,
    pub noise: NoiseSpec,
    /// Model `ln Delta` instead of `Delta`.
    pub log_discrepancy: bool,
    pub standardize: bool,
    pub restarts: usize,
    /// Hyperparameters are optimized on a random subset of at most this
    /// many training points; the final model always uses all of them.
    pub max_opt_points: usize,
    /// Objective evaluations per restart.
    pub max_evals: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            mean: MeanSpec::Constant,
            noise: NoiseSpec::Fitted,
            log_discrepancy: false,
            standardize: true,
            restarts: 5,
            max_opt_points: 300,
            max_evals: 400,
        }
    }
}

/// Hyperparameters, with lengthscales in standardized input units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpHyper {
    pub lengthscales: Vec<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    config: GpConfig,
    hyper: GpHyper,
    mean_value: f64,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    jitter: f64,
    train: DiscrepancySet,
    p: usize,
    /// standardized inputs, row-major `s x p`
    xs: Vec<f64>,
    /// `K_s^{-1} (y - m)`
    alpha: Vec<f64>,
    chol: PackedCholesky,
}

/// On-disk form of a fitted model. Reloading refactorizes the same matrix
/// with the same jitter, which reproduces the model exactly.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpModelFile {
    format: String,
    version: u32,
    config: GpConfig,
    hyper: GpHyper,
    mean_value: f64,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    jitter: f64,
    training_theta: Vec<Vec<f64>>,
    training_delta: Vec<f64>,
}

const FILE_FORMAT: &str = "ejabc-gp-model";

struct Prepared {
    p: usize,
    xs: Vec<f64>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
}

fn prepare(train: &DiscrepancySet, cfg: &GpConfig) -> Result<Prepared> {
    let p = train
        .dim()
        .ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
    let n = train.len();
    let y = train
        .deltas()
        .map(|d| {
            if cfg.log_discrepancy {
                if d <= 0.0 {
                    return invalid(format!("log-discrepancy model needs Delta > 0, got {d}"));
                }
                Ok(d.ln())
            } else {
                Ok(d)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut x_mean = vec![0.0; p];
    let mut x_scale = vec![1.0; p];
    if cfg.standardize {
        for j in 0..p {
            let m = train.thetas().map(|t| t[j]).sum::<f64>() / n as f64;
            let var = train.thetas().map(|t| (t[j] - m).powi(2)).sum::<f64>() / n as f64;
            x_mean[j] = m;
            x_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }
    let mut xs = Vec::with_capacity(n * p);
    for t in train.thetas() {
        for j in 0..p {
            xs.push((t[j] - x_mean[j]) / x_scale[j]);
        }
    }
    Ok(Prepared {
        p,
        xs,
        y,
        x_mean,
        x_scale,
    })
}

fn sq_exp(a: &[f64], b: &[f64], inv_l2: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((x, y), w) in a.iter().zip(b).zip(inv_l2) {
        let d = x - y;
        s += d * d * w;
    }
    (-0.5 * s).exp()
}

fn covariance(xs: &[f64], p: usize, hyper: &GpHyper, diag_extra: f64) -> Vec<f64> {
    let n = xs.len() / p;
    let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut k = PackedCholesky::packed_zeros(n);
    for i in 0..n {
        let xi = &xs[i * p..(i + 1) * p];
        let row = PackedCholesky::row_range(i);
        for j in 0..i {
            k[row.start + j] = hyper.signal_var * sq_exp(xi, &xs[j * p..(j + 1) * p], &inv_l2);
        }
        k[row.start + i] = hyper.signal_var + hyper.noise_var + diag_extra;
    }
    k
}

/// Negative log marginal likelihood, `None` if the covariance is not
/// numerically positive definite.
fn neg_log_marginal(xs: &[f64], p: usize, y_centered: &[f64], hyper: &GpHyper) -> Option<f64> {
    let chol = PackedCholesky::factor(covariance(xs, p, hyper, 0.0), y_centered.len())?;
    let alpha = chol.solve(y_centered);
    let fit: f64 = y_centered.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y_centered.len() as f64;
    Some(0.5 * fit + chol.half_ln_det() + 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }
}

impl GpModel {
    /// Builds the model for given hyperparameters (no optimization).
    pub fn from_hyperparameters(
        train: &DiscrepancySet,
        config: GpConfig,
        hyper: GpHyper,
    ) -> Result<Self> {
        let prep = prepare(train, &config)?;
        let mean_value = match config.mean {
            MeanSpec::Constant => prep.y.iter().sum::<f64>() / prep.y.len() as f64,
            MeanSpec::Fixed(c) => c,
        };
        Self::assemble(train, config, hyper, prep, mean_value, None)
    }

    fn assemble(
        train: &DiscrepancySet,
        config: GpConfig,
        hyper: GpHyper,
        prep: Prepared,
        mean_value: f64,
        fixed_jitter: Option<f64>,
    ) -> Result<Self> {
        if hyper.lengthscales.len() != prep.p {
            return invalid("one lengthscale per input dimension is required");
        }
        if hyper.lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0))
            || !(hyper.signal_var.is_finite() && hyper.signal_var > 0.0)
            || !(hyper.noise_var.is_finite() && hyper.noise_var >= 0.0)
        {
            return invalid(format!("invalid hyperparameters {hyper:?}"));
        }
        let n = prep.y.len();
        let jitters: Vec<f64> = match fixed_jitter {
            Some(j) => vec![j],
            None => std::iter::once(0.0)
                .chain((-10..=-4).map(|e| 10f64.powi(e) * hyper.signal_var))
                .collect(),
        };
        let mut factored = None;
        for &jitter in &jitters {
            let k = covariance(&prep.xs, prep.p, &hyper, jitter);
            if let Some(chol) = PackedCholesky::factor(k, n) {
                factored = Some((chol, jitter));
                break;
            }
            log::debug!("cholesky failed with jitter {jitter:e}");
        }
        let (chol, jitter) = factored.ok_or_else(|| {
            Error::NumericalFailure("covariance matrix is not positive definite after jitter".into())
        })?;
        let centered: Vec<f64> = prep.y.iter().map(|v| v - mean_value).collect();
        let alpha = chol.solve(&centered);
        Ok(Self {
            config,
            hyper,
            mean_value,
            x_mean: prep.x_mean,
            x_scale: prep.x_scale,
            jitter,
            train: train.clone(),
            p: prep.p,
            xs: prep.xs,
            alpha,
            chol,
        })
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn hyperparameters(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn mean_value(&self) -> f64 {
        self.mean_value
    }

    pub fn noise_var(&self) -> f64 {
        self.hyper.noise_var
    }

    pub fn training_set(&self) -> &DiscrepancySet {
        &self.train
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    fn standardize(&self, theta: &ParamVector) -> Vec<f64> {
        theta
            .as_slice()
            .iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(t, (m, s))| (t - m) / s)
            .collect()
    }

    fn cross_cov(&self, z: &[f64]) -> Vec<f64> {
        let inv_l2: Vec<f64> = self.hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        self.xs
            .chunks_exact(self.p)
            .map(|xi| self.hyper.signal_var * sq_exp(z, xi, &inv_l2))
            .collect()
    }

    /// Predictive mean and latent variance `(mu, v)` on the modeled scale
    /// (log scale when the log-discrepancy flag is set).
    pub fn predict(&self, theta: &ParamVector) -> Result<(f64, f64)> {
        theta.check_dim(self.p)?;
        let z = self.standardize(theta);
        let k = self.cross_cov(&z);
        let mu = self.mean_value + linalg::dot(&k, &self.alpha);
        let w = self.chol.forward(&k);
        let v = (self.hyper.signal_var - linalg::dot(&w, &w)).max(0.0);
        Ok((mu, v))
    }

    /// Predictive mean only (skips the triangular solve).
    pub fn predict_mean(&self, theta: &ParamVector) -> Result<f64> {
        theta.check_dim(self.p)?;
        let k = self.cross_cov(&self.standardize(theta));
        Ok(self.mean_value + linalg::dot(&k, &self.alpha))
    }

    /// Lower `a`-quantile of the predictive distribution of the discrepancy:
    /// `mu + Phi^{-1}(a) sqrt(v + sigma^2)`, mapped back through `exp` when
    /// the log-discrepancy flag is set.
    pub fn h_quantile(&self, theta: &ParamVector, a: f64) -> Result<f64> {
        if !(a > 0.0 && a < 1.0) {
            return invalid(format!("quantile level must lie in (0, 1), got {a}"));
        }
        self.quantile_with_z(theta, norm_ppf(a))
    }

    fn quantile_with_z(&self, theta: &ParamVector, z: f64) -> Result<f64> {
        let (mu, v) = self.predict(theta)?;
        let q = mu + z * (v + self.hyper.noise_var).sqrt();
        Ok(if self.config.log_discrepancy { q.exp() } else { q })
    }

    /// `ln pi(theta) + ln Phi((eps - mu) / sqrt(v + sigma^2))`.
    pub fn abc_logdensity(&self, theta: &ParamVector, eps: f64, prior: &PriorSpec) -> Result<f64> {
        if !(eps > 0.0) {
            return invalid(format!("tolerance must be positive, got {eps}"));
        }
        theta.check_dim(prior.dim())?;
        let lp = prior.ln_density(theta);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let (mu, v) = self.predict(theta)?;
        let target = if self.config.log_discrepancy { eps.ln() } else { eps };
        let sd = (v + self.hyper.noise_var).sqrt();
        let lphi = if sd > 0.0 {
            ln_norm_cdf((target - mu) / sd)
        } else if target >= mu {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        Ok(lp + lphi)
    }

    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = GpModelFile {
            format: FILE_FORMAT.into(),
            version: 1,
            config: self.config.clone(),
            hyper: self.hyper.clone(),
            mean_value: self.mean_value,
            x_mean: self.x_mean.clone(),
            x_scale: self.x_scale.clone(),
            jitter: self.jitter,
            training_theta: self.train.thetas().map(|t| t.as_slice().to_vec()).collect(),
            training_delta: self.train.deltas().collect(),
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file: GpModelFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format != FILE_FORMAT || file.version != 1 {
            return Err(Error::Format(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        if file.training_theta.len() != file.training_delta.len() {
            return Err(Error::Format("training arrays differ in length".into()));
        }
        let train = DiscrepancySet::new(
            file.training_theta
                .into_iter()
                .zip(file.training_delta)
                .map(|(t, d)| Ok((ParamVector::new(t)?, d)))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let mut prep = prepare(&train, &file.config)?;
        // use the stored constants rather than recomputing them
        let p = prep.p;
        if file.x_mean.len() != p || file.x_scale.len() != p {
            return Err(Error::Format("standardization constants have wrong length".into()));
        }
        prep.xs.clear();
        for t in train.thetas() {
            for j in 0..p {
                prep.xs.push((t[j] - file.x_mean[j]) / file.x_scale[j]);
            }
        }
        prep.x_mean = file.x_mean;
        prep.x_scale = file.x_scale;
        Self::assemble(
            &train,
            file.config,
            file.hyper,
            prep,
            file.mean_value,
            Some(file.jitter),
        )
    }
}

/// Fits the surrogate by maximizing the log marginal likelihood.
pub fn fit_gp(train: &DiscrepancySet, cfg: &GpConfig, rng: &RngStream) -> Result<GpModel> {
    if train.len() < MIN_TRAINING_SIZE {
        return invalid(format!(
            "need at least {MIN_TRAINING_SIZE} training points, got {}",
            train.len()
        ));
    }
    if cfg.restarts == 0 {
        return invalid("hyperparameter search needs at least one restart");
    }
    if let NoiseSpec::Fixed(s2) = cfg.noise {
        if !(s2.is_finite() && s2 >= 0.0) {
            return invalid(format!("fixed noise variance must be >= 0, got {s2}"));
        }
    }
    let prep = prepare(train, cfg)?;
    let p = prep.p;
    let n = prep.y.len();
    let mean_value = match cfg.mean {
        MeanSpec::Constant => prep.y.iter().sum::<f64>() / n as f64,
        MeanSpec::Fixed(c) => c,
    };
    let centered: Vec<f64> = prep.y.iter().map(|v| v - mean_value).collect();
    let var_y = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let y_scale = if var_y > 0.0 { var_y } else { 1.0 };

    // optimization subset
    let idx: Vec<usize> = if n > cfg.max_opt_points {
        let mut sel = rng.fork(u64::MAX);
        let mut all: Vec<usize> = (0..n).collect();
        for i in 0..cfg.max_opt_points {
            let j = i + (sel.uniform() * (n - i) as f64) as usize;
            all.swap(i, j.min(n - 1));
        }
        let mut chosen = all[..cfg.max_opt_points].to_vec();
        chosen.sort_unstable();
        chosen
    } else {
        (0..n).collect()
    };
    let sub_x: Vec<f64> = idx
        .iter()
        .flat_map(|&i| prep.xs[i * p..(i + 1) * p].iter().copied())
        .collect();
    let sub_y: Vec<f64> = idx.iter().map(|&i| centered[i]).collect();

    // input spread per dimension (1 when standardized)
    let spread: Vec<f64> = (0..p)
        .map(|j| {
            let col: Vec<f64> = prep.xs.chunks_exact(p).map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();

    let fit_noise = matches!(cfg.noise, NoiseSpec::Fitted);
    let noise_floor = 1e-8 * y_scale;
    let mut lo: Vec<f64> = spread.iter().map(|s| (1e-2 * s).ln()).collect();
    let mut hi: Vec<f64> = spread.iter().map(|s| (1e2 * s).ln()).collect();
    lo.push((1e-6 * y_scale).ln());
    hi.push((1e4 * y_scale).ln());
    if fit_noise {
        lo.push(noise_floor.ln());
        hi.push((10.0 * y_scale).ln());
    }
    let bounds = Bounds { lo, hi };

    let decode = |phi: &[f64]| -> GpHyper {
        let phi = bounds.clamp(phi);
        GpHyper {
            lengthscales: phi[..p].iter().map(|v| v.exp()).collect(),
            signal_var: phi[p].exp(),
            noise_var: match cfg.noise {
                NoiseSpec::Fitted => phi[p + 1].exp(),
                NoiseSpec::Fixed(s2) => s2,
            },
        }
    };
    let objective = |phi: &[f64]| -> f64 {
        neg_log_marginal(&sub_x, p, &sub_y, &decode(phi)).unwrap_or(f64::INFINITY)
    };

    // data-driven starting point: median pairwise distance and target variance
    let m = idx.len().min(200);
    let mut start: Vec<f64> = (0..p)
        .map(|j| {
            let mut d = Vec::with_capacity(m * (m - 1) / 2);
            for a in 0..m {
                for b in 0..a {
                    d.push((sub_x[a * p + j] - sub_x[b * p + j]).abs());
                }
            }
            d.sort_by(f64::total_cmp);
            d.get(d.len() / 2).copied().unwrap_or(1.0).max(1e-3 * spread[j]).ln()
        })
        .collect();
    start.push(y_scale.ln());
    if fit_noise {
        start.push((0.1 * y_scale).ln());
    }
    let start = bounds.clamp(&start);

    let nm = NelderMead {
        step: 0.7,
        max_evals: cfg.max_evals,
        f_tol: 1e-7,
    };
    let results: Vec<(f64, Vec<f64>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let x0: Vec<f64> = if r == 0 {
                start.clone()
            } else {
                let mut g = rng.fork(r as u64);
                bounds.clamp(&start.iter().map(|v| v + g.standard_normal()).collect::<Vec<_>>())
            };
            let best = nm.minimize(&objective, &x0);
            (best.f, best.x)
        })
        .collect();
    let (best_f, best_x) = results
        .into_iter()
        .fold((f64::INFINITY, start.clone()), |acc, (f, x)| if f < acc.0 { (f, x) } else { acc });
    if !best_f.is_finite() {
        return Err(Error::NumericalFailure(
            "log marginal likelihood could not be evaluated at any start".into(),
        ));
    }
    let hyper = decode(&best_x);
    log::debug!("gp fit: nlml {best_f:.6} hyper {hyper:?}");
    GpModel::assemble(train, cfg.clone(), hyper, prep, mean_value, None)
}

pub fn gp_predict(model: &GpModel, theta: &ParamVector) -> Result<(f64, f64)> {
    model.predict(theta)
}

pub fn h_quantile(model: &GpModel, theta: &ParamVector, a: f64) -> Result<f64> {
    model.h_quantile(theta, a)
}

pub fn gp_abc_logdensity(
    model: &GpModel,
    theta: &ParamVector,
    eps: f64,
    prior: &PriorSpec,
) -> Result<f64> {
    model.abc_logdensity(theta, eps, prior)
}

/// `h_a(theta)` from a shared fitted surrogate.
#[derive(Debug, Clone)]
pub struct GpQuantile {
    model: Arc<GpModel>,
    a: f64,
    z: f64,
}

impl GpQuantile {
    pub fn new(model: Arc<GpModel>, a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return invalid(format!("quantile level must lie in (0, 1), got {a}"));
        }
        Ok(Self {
            model,
            a,
            z: norm_ppf(a),
        })
    }

    pub fn level(&self) -> f64 {
        self.a
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }
}

impl DiscrepancyBound for GpQuantile {
    fn bound(&self, theta: &ParamVector) -> Result<f64> {
        self.model.quantile_with_z(theta, self.z)
    }
}

/// Monte Carlo estimate of `P(Delta(x, y) <= h(theta))` with
/// `theta ~ prior` and one simulation per draw. A calibrated `h_a` gives
/// roughly `a`.
pub fn false_rejection_rate(
    bound: &dyn DiscrepancyBound,
    model: &dyn AbcModel,
    prior: &dyn Prior,
    draws: usize,
    rng: &RngStream,
) -> Result<f64> {
    if draws < 100 {
        return invalid(format!("need at least 100 draws, got {draws}"));
    }
    let hits = (0..draws)
        .into_par_iter()
        .map(|j| {
            let mut r = rng.fork(j as u64);
            let theta = prior.sample(&mut r);
            let delta = model.simulate_discrepancy(&theta, &mut r)?;
            let h = bound.bound(&theta)?;
            Ok(usize::from(delta <= h))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(hits as f64 / draws as f64)
}

/// Solves `A x = b` for symmetric positive definite `A` with the packed
/// Cholesky factorization the GP uses internally. Only the lower triangle
/// of `A` is read. `None` if `A` is not numerically positive definite.
pub fn spd_solve(a: &nalgebra::DMatrix<f64>, b: &[f64]) -> Result<Option<Vec<f64>>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return invalid("spd_solve needs a square matrix and matching right-hand side");
    }
    let mut packed = PackedCholesky::packed_zeros(n);
    for i in 0..n {
        let r = PackedCholesky::row_range(i);
        for (j, slot) in packed[r].iter_mut().enumerate() {
            *slot = a[(i, j)];
        }
    }
    Ok(PackedCholesky::factor(packed, n).map(|c| c.solve(b)))
}
