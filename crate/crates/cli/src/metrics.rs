//! `metrics.json`: counters, posterior summaries and accuracy measures.

use ejabc::diagnostics::{
    gelman_rubin, kde_density, l1_between_samples, l1_distance, linspace, marginal, toy_posterior_oracle,
    DEFAULT_GRID_POINTS,
};
use ejabc::mcmc::read_samples_csv;
use ejabc::simulators::{SimulatorSpec, TOY_OBSERVATION};
use ejabc::smc::ParticleSet;
use ejabc::{KernelSpec, Marginal, ParamVector};
use serde::{Deserialize, Serialize};

use crate::manifest::{counters_from_dir, Counters};
use crate::pipeline::{require, samples_file, Experiment, SmcSummary, METRICS_FILE, PARTICLES_FILE, SMC_SUMMARY_FILE};
use crate::CliError;

/// Posterior draws read back from the output directory.
pub struct Posterior {
    /// Per-chain states after burn-in (one entry for SMC).
    pub chains: Vec<Vec<ParamVector>>,
    /// Tolerance the draws target.
    pub eps: Option<f64>,
}

impl Posterior {
    pub fn pooled(&self) -> Vec<ParamVector> {
        self.chains.iter().flatten().cloned().collect()
    }
}

/// `n` draws from a weighted particle set by systematic resampling with
/// a fixed offset of one half, so the result is deterministic.
pub fn weighted_draws(set: &ParticleSet, n: usize) -> Vec<ParamVector> {
    let total: f64 = set.particles.iter().map(|p| p.weight).sum();
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut k = 0;
    for p in &set.particles {
        cum += p.weight / total;
        while k < n && (k as f64 + 0.5) / n as f64 <= cum {
            out.push(p.theta.clone());
            k += 1;
        }
    }
    // rounding can leave the last slots empty
    while out.len() < n {
        let last = set.particles.iter().rev().find(|p| p.weight > 0.0).expect("positive weight");
        out.push(last.theta.clone());
    }
    out
}

pub fn load_posterior(exp: &Experiment) -> Result<Posterior, CliError> {
    if let Some(m) = exp.mcmc() {
        let burn = exp.cfg.metrics.burn_in;
        if burn >= m.iterations {
            return Err(CliError::Validation(format!(
                "metrics.burn_in: {burn} leaves no draws out of {} iterations",
                m.iterations
            )));
        }
        let mut chains = Vec::with_capacity(m.chains);
        for c in 0..m.chains {
            let path = exp.path(&samples_file(c, m.chains));
            require(&path)?;
            let s = read_samples_csv(&path)?;
            chains.push(s.into_iter().skip(burn).collect());
        }
        Ok(Posterior {
            chains,
            eps: Some(m.eps),
        })
    } else {
        let path = exp.path(PARTICLES_FILE);
        require(&path)?;
        let set = ParticleSet::read_csv(&path)?;
        let summary = SmcSummary::read(&exp.path(SMC_SUMMARY_FILE))?;
        Ok(Posterior {
            chains: vec![weighted_draws(&set, set.len())],
            eps: summary.eps,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sampler: String,
    pub draws: usize,
    pub counters: Option<Counters>,
    pub acceptance_rate: Option<f64>,
    pub sim_fraction: Option<f64>,
    pub parameters: Vec<ParamSummary>,
    /// L1 distance of the draws' KDE to the exact toy ABC posterior
    /// (toy model, uniform kernel, `U(-6, 6)` prior, `y = 1`).
    pub toy_oracle_l1: Option<f64>,
    /// Per-parameter L1 distance to the reference samples.
    pub reference_l1: Option<Vec<f64>>,
    /// Per-parameter potential scale reduction (two or more chains).
    pub gelman_rubin: Option<Vec<Option<f64>>>,
    pub smc: Option<SmcSummary>,
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

pub fn summarize(draws: &[ParamVector]) -> Vec<ParamSummary> {
    let p = draws.first().map_or(0, ParamVector::dim);
    (0..p)
        .map(|j| {
            let mut x = marginal(draws, j);
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = if x.len() > 1 {
                x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            x.sort_by(f64::total_cmp);
            ParamSummary {
                name: format!("theta_{}", j + 1),
                mean,
                sd: var.sqrt(),
                q05: quantile(&x, 0.05),
                q50: quantile(&x, 0.5),
                q95: quantile(&x, 0.95),
            }
        })
        .collect()
}

fn toy_oracle_applies(exp: &Experiment) -> bool {
    let kernel = match (exp.mcmc(), exp.smc()) {
        (Some(m), _) => m.kernel,
        (_, Some(s)) => s.kernel,
        _ => return false,
    };
    matches!(exp.cfg.model, SimulatorSpec::ToyMixture(_))
        && kernel == KernelSpec::Uniform
        && exp.prior.marginals() == [Marginal::Uniform { lo: -6.0, hi: 6.0 }]
        && exp.observed.data.values() == [TOY_OBSERVATION]
}

pub fn compute(exp: &Experiment) -> Result<Metrics, CliError> {
    let post = load_posterior(exp)?;
    let pooled = post.pooled();
    if pooled.len() < 2 {
        return Err(CliError::Runtime("fewer than two posterior draws".into()));
    }
    let grid_points = exp.cfg.metrics.grid_points.unwrap_or(DEFAULT_GRID_POINTS);
    let counters = counters_from_dir(exp)?;
    let toy_oracle_l1 = match post.eps {
        Some(eps) if toy_oracle_applies(exp) => {
            let grid = linspace(-6.0, 6.0, grid_points);
            let kde = kde_density(&marginal(&pooled, 0), &grid, None)?;
            Some(l1_distance(&kde.density, &toy_posterior_oracle(&grid, eps)?)?)
        }
        _ => None,
    };
    let reference_l1 = match &exp.cfg.metrics.reference_samples {
        Some(path) => {
            let reference = read_samples_csv(path)?;
            let p = pooled[0].dim();
            if reference.first().map(ParamVector::dim) != Some(p) {
                return Err(CliError::Validation(format!(
                    "metrics.reference_samples: expected {p} columns"
                )));
            }
            Some(
                (0..p)
                    .map(|j| Ok(l1_between_samples(&marginal(&pooled, j), &marginal(&reference, j), grid_points)?.l1))
                    .collect::<Result<Vec<f64>, CliError>>()?,
            )
        }
        None => None,
    };
    let gelman_rubin = (post.chains.len() >= 2).then(|| {
        (0..pooled[0].dim())
            .map(|j| {
                let per: Vec<Vec<f64>> = post.chains.iter().map(|c| marginal(c, j)).collect();
                gelman_rubin(&per).ok()
            })
            .collect()
    });
    let smc = match exp.smc() {
        Some(_) => Some(SmcSummary::read(&exp.path(SMC_SUMMARY_FILE))?),
        None => None,
    };
    Ok(Metrics {
        sampler: exp.sampler_name(),
        draws: pooled.len(),
        counters: counters.map(Counters::from),
        acceptance_rate: counters.filter(|c| c.n_iter > 0).map(|c| c.n_accept as f64 / c.n_iter as f64),
        sim_fraction: counters.filter(|c| c.n_iter > 0).map(|c| c.n_sim as f64 / c.n_iter as f64),
        parameters: summarize(&pooled),
        toy_oracle_l1,
        reference_l1,
        gelman_rubin,
        smc,
    })
}

pub fn write_metrics(exp: &Experiment) -> Result<(), CliError> {
    let m = compute(exp)?;
    std::fs::write(exp.path(METRICS_FILE), serde_json::to_string_pretty(&m)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ejabc::smc::Particle;

    fn particle(x: f64, w: f64) -> Particle {
        Particle {
            theta: ParamVector::new(vec![x]).unwrap(),
            delta: 0.0,
            weight: w,
            h: None,
        }
    }

    #[test]
    fn weighted_draws_follow_weights() {
        let set = ParticleSet::new(vec![particle(0.0, 0.25), particle(1.0, 0.0), particle(2.0, 0.75)]);
        let d = weighted_draws(&set, 8);
        let xs = marginal(&d, 0);
        assert_eq!(xs, vec![0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn summary_quantiles() {
        let d: Vec<ParamVector> = (0..=100).map(|i| ParamVector::new(vec![i as f64]).unwrap()).collect();
        let s = &summarize(&d)[0];
        assert_eq!(s.mean, 50.0);
        assert_eq!(s.q05, 5.0);
        assert_eq!(s.q50, 50.0);
        assert_eq!(s.q95, 95.0);
    }
}
