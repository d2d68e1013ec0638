//! Adaptive ABC-SMC with early-rejection MCMC moves.
//!
//! Each round picks the next tolerance so that a fraction `gamma` of the
//! unique particles stays alive, reweights by the kernel ratio, resamples
//! when the effective sample size drops, and moves every alive particle
//! with OejMCMC or ejMCMC steps using the weighted particle covariance.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ParamVector;
use crate::diagnostics::EffSummary;
use crate::error::{invalid, Error, Result};
use crate::gp::DiscrepancySet;
use crate::io::{fmt_num, read_numeric_csv, theta_header, write_csv};
use crate::kernel::KernelSpec;
use crate::mcmc::{mh_step, ChainState, IterationRecord, SamplerKind, StepContext};
use crate::model::{AbcModel, DiscrepancyBound};
use crate::prior::{Prior, ProposalSpec};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub theta: ParamVector,
    /// `+inf` after a failed simulation.
    pub delta: f64,
    pub weight: f64,
    /// Cached surrogate prediction (ejMCMC moves only).
    pub h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
}

impl ParticleSet {
    pub fn new(particles: Vec<Particle>) -> Self {
        Self { particles }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn ess(&self) -> f64 {
        let s2: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        if s2 > 0.0 {
            1.0 / s2
        } else {
            0.0
        }
    }

    /// Distinct parameter vectors among particles with positive weight.
    pub fn unique_alive(&self) -> usize {
        self.particles
            .iter()
            .filter(|p| p.weight > 0.0)
            .map(|p| p.theta.bit_key())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn weighted_mean_delta(&self) -> f64 {
        self.particles
            .iter()
            .filter(|p| p.weight > 0.0)
            .map(|p| p.weight * p.delta)
            .sum()
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let p = self.particles.first().map_or(1, |x| x.theta.dim());
        let header: Vec<String> = theta_header(p)
            .chain(["delta", "weight"].into_iter().map(String::from))
            .collect();
        write_csv(
            path,
            &header,
            self.particles.iter().map(|x| {
                x.theta
                    .as_slice()
                    .iter()
                    .map(|v| fmt_num(*v))
                    .chain([fmt_num(x.delta), fmt_num(x.weight)])
                    .collect()
            }),
        )
    }

    /// Reads the format written by [`ParticleSet::write_csv`]; `h` is not
    /// stored and comes back as `None`.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let (header, rows) = read_numeric_csv(path)?;
        let n = header.len();
        if n < 3 || header[n - 2] != "delta" || header[n - 1] != "weight" {
            return Err(Error::Format(format!("not a particle file: {}", header.join(","))));
        }
        let particles = rows
            .into_iter()
            .map(|r| {
                Ok(Particle {
                    theta: ParamVector::new(r[..n - 2].to_vec())?,
                    delta: r[n - 2],
                    weight: r[n - 1],
                    h: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(particles))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Target fraction of unique particles kept alive per round.
    pub gamma: f64,
    pub kernel: KernelSpec,
    /// `oej_mcmc` or `ej_mcmc`.
    pub move_kind: SamplerKind,
    pub moves: usize,
    /// Resample when ESS <= threshold * N.
    pub resample_threshold: f64,
    /// Multiplier on the weighted particle covariance.
    pub proposal_scale: f64,
    /// Stop once this many simulations have been run.
    pub budget: Option<usize>,
    pub target_eps: Option<f64>,
    pub max_rounds: Option<usize>,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            gamma: 0.5,
            kernel: KernelSpec::Uniform,
            move_kind: SamplerKind::OejMcmc,
            moves: 1,
            resample_threshold: 0.5,
            proposal_scale: 1.0,
            budget: Some(50_000),
            target_eps: None,
            max_rounds: None,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return invalid("smc needs at least two particles");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if self.move_kind == SamplerKind::AbcMcmc {
            return invalid("smc moves must be oej_mcmc or ej_mcmc");
        }
        if !(0.0..=1.0).contains(&self.resample_threshold) {
            return invalid("resample threshold must lie in [0, 1]");
        }
        if !(self.proposal_scale > 0.0) {
            return invalid("proposal scale must be positive");
        }
        if self.budget.is_none() && self.target_eps.is_none() && self.max_rounds.is_none() {
            return invalid("smc needs a stopping rule (budget, target_eps or max_rounds)");
        }
        Ok(())
    }
}

/// Unique-particle groups alive under the previous weights, each with the
/// smallest discrepancy among its members.
fn unique_deltas(particles: &ParticleSet) -> Vec<f64> {
    let mut best: HashMap<Vec<u64>, f64> = HashMap::new();
    for p in particles.particles.iter().filter(|p| p.weight > 0.0) {
        let e = best.entry(p.theta.bit_key()).or_insert(f64::INFINITY);
        *e = e.min(p.delta);
    }
    best.into_values().collect()
}

/// Smallest tolerance keeping at least `ceil(gamma N)` unique particles
/// alive after reweighting.
pub fn select_epsilon(
    particles: &ParticleSet,
    gamma: f64,
    kernel: KernelSpec,
    eps_prev: f64,
) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    if !(eps_prev > 0.0) {
        return invalid(format!("previous tolerance must be positive, got {eps_prev}"));
    }
    let need = (gamma * particles.len() as f64).ceil() as usize;
    let mut deltas = unique_deltas(particles);
    deltas.sort_by(f64::total_cmp);
    let alive_at = |eps: f64| deltas.iter().filter(|d| kernel.weight(**d, eps) > 0.0).count();
    let degenerate = || {
        Error::Degeneracy(format!(
            "fewer than {need} unique particles alive at eps = {eps_prev}"
        ))
    };
    if need == 0 || deltas.len() < need || !deltas[need - 1].is_finite() {
        return Err(degenerate());
    }
    let order_stat = deltas[need - 1];
    if kernel == KernelSpec::Uniform {
        if order_stat > eps_prev {
            return Err(degenerate());
        }
        return Ok(order_stat);
    }

    // kernels vanishing at u = eps need eps strictly above the order statistic
    let mut hi = if eps_prev.is_finite() {
        eps_prev
    } else {
        let top = deltas.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        (top * (1.0 + 1e-6)).max(f64::MIN_POSITIVE)
    };
    if alive_at(hi) < need {
        return Err(degenerate());
    }
    let mut lo = deltas[0].max(0.0);
    if lo > 0.0 && alive_at(lo) >= need {
        return Ok(lo);
    }
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if alive_at(mid) >= need {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `W <- W K_new(Delta) / K_old(Delta)`, renormalized.
pub fn reweight(
    particles: &ParticleSet,
    eps_old: f64,
    eps_new: f64,
    kernel: KernelSpec,
) -> Result<ParticleSet> {
    if !(eps_new > 0.0) || eps_new > eps_old {
        return invalid(format!("need 0 < eps_new <= eps_old, got {eps_new} and {eps_old}"));
    }
    let mut out = particles.clone();
    for p in &mut out.particles {
        let old = kernel.weight(p.delta, eps_old);
        p.weight = if p.weight > 0.0 && old > 0.0 {
            p.weight * kernel.weight(p.delta, eps_new) / old
        } else {
            0.0
        };
    }
    let total: f64 = out.particles.iter().map(|p| p.weight).sum();
    if !(total > 0.0) {
        return Err(Error::Degeneracy(format!("all weights vanish at eps = {eps_new}")));
    }
    out.particles.iter_mut().for_each(|p| p.weight /= total);
    Ok(out)
}

/// Weighted covariance `sum W (theta - m)(theta - m)^T` of the alive
/// particles.
pub fn weighted_covariance(particles: &ParticleSet) -> Result<DMatrix<f64>> {
    let alive: Vec<&Particle> = particles.particles.iter().filter(|p| p.weight > 0.0).collect();
    if particles.unique_alive() < 2 {
        return Err(Error::Degeneracy("fewer than two unique alive particles".into()));
    }
    let dim = alive[0].theta.dim();
    let total: f64 = alive.iter().map(|p| p.weight).sum();
    let mut mean = vec![0.0; dim];
    for p in &alive {
        for (j, m) in mean.iter_mut().enumerate() {
            *m += p.weight / total * p.theta[j];
        }
    }
    let mut cov = DMatrix::zeros(dim, dim);
    for p in &alive {
        let w = p.weight / total;
        for i in 0..dim {
            for j in 0..=i {
                cov[(i, j)] += w * (p.theta[i] - mean[i]) * (p.theta[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

/// Weighted covariance plus `1e-10 trace / p` on the diagonal.
pub fn adapt_proposal_cov(particles: &ParticleSet) -> Result<DMatrix<f64>> {
    let mut cov = weighted_covariance(particles)?;
    let p = cov.nrows();
    let ridge = 1e-10 * cov.trace() / p as f64;
    for i in 0..p {
        cov[(i, i)] += ridge;
    }
    Ok(cov)
}

/// Systematic resampling to `N` equal weights when `ESS <= threshold N`.
/// Returns whether resampling happened.
pub fn resample(
    particles: &ParticleSet,
    threshold: f64,
    rng: &mut RngStream,
) -> (ParticleSet, bool) {
    let n = particles.len();
    // slack so that an ESS landing exactly on the threshold (uniform kernel,
    // gamma = threshold) still resamples despite rounding
    if n == 0 || particles.ess() > threshold * n as f64 * (1.0 + 1e-9) {
        return (particles.clone(), false);
    }
    let u0 = rng.uniform() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 / n as f64;
        while j + 1 < n && cum + particles.particles[j].weight <= u {
            cum += particles.particles[j].weight;
            j += 1;
        }
        // never copy a dead particle, even at the rounding edge
        while particles.particles[j].weight == 0.0 && j > 0 {
            j -= 1;
        }
        let mut p = particles.particles[j].clone();
        p.weight = 1.0 / n as f64;
        out.push(p);
    }
    (ParticleSet::new(out), true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub eps: f64,
    pub unique_alive: usize,
    pub accept_rate: f64,
    pub n_sim: usize,
    pub n_early1: usize,
    pub n_early2: usize,
    /// Surrogate predictions at proposals.
    pub n_pre: usize,
    /// Surrogate predictions at particles that had none cached.
    pub n_state_pre: usize,
    pub ess: f64,
    pub resampled: bool,
}

pub fn write_rounds_csv<P: AsRef<Path>>(path: P, rounds: &[RoundReport]) -> Result<()> {
    let header: Vec<String> = [
        "round",
        "eps",
        "unique_alive",
        "accept_rate",
        "n_sim",
        "n_early1",
        "n_early2",
    ]
    .into_iter()
    .map(String::from)
    .collect();
    write_csv(
        path,
        &header,
        rounds.iter().map(|r| {
            vec![
                r.round.to_string(),
                fmt_num(r.eps),
                r.unique_alive.to_string(),
                fmt_num(r.accept_rate),
                r.n_sim.to_string(),
                r.n_early1.to_string(),
                r.n_early2.to_string(),
            ]
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    TargetEps,
    MaxRounds,
    /// Tolerance selection or reweighting failed; the run stops with the
    /// last valid particle set.
    Degenerate(String),
}

#[derive(Debug, Clone)]
pub struct SmcRun {
    pub particles: ParticleSet,
    pub eps: f64,
    pub rounds: Vec<RoundReport>,
    /// Counters over all move steps (initial prior simulations excluded).
    pub moves: EffSummary,
    /// Simulations including the initial population.
    pub n_sim_total: usize,
    /// Surrogate predictions at particles rather than proposals; not in
    /// `moves.n_pre`.
    pub n_state_pre: usize,
    pub termination: Termination,
    /// Every finite simulated `(theta, Delta)` pair, when recording.
    pub pairs: Vec<(ParamVector, f64)>,
}

impl SmcRun {
    pub fn efficiency(&self) -> f64 {
        self.moves.efficiency()
    }
}

enum Budget {
    Simulations(usize),
    Pairs(usize),
}

struct Runner<'a> {
    cfg: &'a SmcConfig,
    prior: &'a dyn Prior,
    model: &'a dyn AbcModel,
    bound: Option<&'a dyn DiscrepancyBound>,
    record: bool,
    budget: Option<Budget>,
}

fn simulate_or_inf(model: &dyn AbcModel, theta: &ParamVector, rng: &mut RngStream) -> f64 {
    match model.simulate_discrepancy(theta, rng) {
        Ok(d) if d >= 0.0 => d,
        _ => f64::INFINITY,
    }
}

impl Runner<'_> {
    fn budget_reached(&self, n_sim: usize, n_pairs: usize) -> bool {
        match self.budget {
            Some(Budget::Simulations(b)) => n_sim >= b,
            Some(Budget::Pairs(b)) => n_pairs >= b,
            None => false,
        }
    }

    fn run(&self, rng: &RngStream) -> Result<SmcRun> {
        let cfg = self.cfg;
        cfg.validate()?;
        if self.prior.dim() != self.model.param_dim() {
            return invalid("prior and model dimensions differ");
        }
        if cfg.move_kind == SamplerKind::EjMcmc && self.bound.is_none() {
            return invalid("ej_mcmc moves need a discrepancy model");
        }
        let n = cfg.n_particles;

        let init: Vec<Particle> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng.fork2(0, i as u64);
                let theta = self.prior.sample(&mut r);
                let delta = simulate_or_inf(self.model, &theta, &mut r);
                Particle {
                    theta,
                    delta,
                    weight: 1.0 / n as f64,
                    h: None,
                }
            })
            .collect();
        let mut pairs = Vec::new();
        if self.record {
            pairs.extend(
                init.iter()
                    .filter(|p| p.delta.is_finite())
                    .map(|p| (p.theta.clone(), p.delta)),
            );
        }
        let mut particles = ParticleSet::new(init);
        let mut eps = f64::INFINITY;
        let mut n_sim_total = n;
        let mut moves = EffSummary::default();
        let mut n_state_pre = 0;
        let mut rounds = vec![RoundReport {
            round: 0,
            eps,
            unique_alive: particles.unique_alive(),
            accept_rate: 1.0,
            n_sim: n,
            n_early1: 0,
            n_early2: 0,
            n_pre: 0,
            n_state_pre: 0,
            ess: particles.ess(),
            resampled: false,
        }];

        let mut round = 0usize;
        let termination = loop {
            if self.budget_reached(n_sim_total, pairs.len()) {
                break Termination::Budget;
            }
            if cfg.target_eps.is_some_and(|t| eps <= t) {
                break Termination::TargetEps;
            }
            if cfg.max_rounds.is_some_and(|m| round >= m) {
                break Termination::MaxRounds;
            }
            round += 1;

            let mut next_eps = match select_epsilon(&particles, cfg.gamma, cfg.kernel, eps) {
                Ok(e) => e,
                Err(Error::Degeneracy(msg)) => break Termination::Degenerate(msg),
                Err(e) => return Err(e),
            };
            if let Some(t) = cfg.target_eps {
                next_eps = next_eps.max(t);
            }
            let reweighted = match reweight(&particles, eps, next_eps, cfg.kernel) {
                Ok(p) => p,
                Err(Error::Degeneracy(msg)) => break Termination::Degenerate(msg),
                Err(e) => return Err(e),
            };
            eps = next_eps;
            let unique_alive = reweighted.unique_alive();
            let mut rs_rng = rng.fork2(round as u64, u64::MAX);
            let (resampled_set, resampled) = resample(&reweighted, cfg.resample_threshold, &mut rs_rng);
            particles = resampled_set;
            let ess = particles.ess();

            let mut round_summary = EffSummary::default();
            let mut state_pre = 0;
            if cfg.moves > 0 {
                let cov = match adapt_proposal_cov(&particles) {
                    Ok(c) => c * cfg.proposal_scale,
                    Err(Error::Degeneracy(msg)) => break Termination::Degenerate(msg),
                    Err(e) => return Err(e),
                };
                let proposal = ProposalSpec::new(cov)
                    .map_err(|e| Error::Degeneracy(format!("particle covariance: {e}")))?;
                let ctx = StepContext {
                    kind: cfg.move_kind,
                    kernel: cfg.kernel,
                    eps,
                    prior: self.prior,
                    proposal: &proposal,
                    model: self.model,
                    bound: self.bound,
                };
                let results: Vec<Result<(Particle, Vec<IterationRecord>, usize)>> = particles
                    .particles
                    .par_iter()
                    .enumerate()
                    .map(|(i, p)| self.move_particle(&ctx, p, &rng.fork2(round as u64, i as u64)))
                    .collect();
                let mut moved = Vec::with_capacity(n);
                for r in results {
                    let (p, trace, extra_pre) = r?;
                    let s = EffSummary::from_trace(&trace);
                    round_summary = round_summary.merge(&s);
                    state_pre += extra_pre;
                    if self.record {
                        pairs.extend(
                            trace
                                .iter()
                                .filter(|t| t.sim && !t.failed)
                                .filter_map(|t| t.delta.map(|d| (t.theta.clone(), d))),
                        );
                    }
                    moved.push(p);
                }
                particles = ParticleSet::new(moved);
            }
            n_sim_total += round_summary.n_sim;
            n_state_pre += state_pre;
            moves = moves.merge(&round_summary);
            let attempted = round_summary.n_iter;
            rounds.push(RoundReport {
                round,
                eps,
                unique_alive,
                accept_rate: if attempted > 0 {
                    round_summary.n_accept as f64 / attempted as f64
                } else {
                    0.0
                },
                n_sim: round_summary.n_sim,
                n_early1: round_summary.n_early1,
                n_early2: round_summary.n_early2,
                n_pre: round_summary.n_pre,
                n_state_pre: state_pre,
                ess,
                resampled,
            });
            log::debug!(
                "smc round {round}: eps {eps:.6} unique {unique_alive} sims {}",
                round_summary.n_sim
            );
        };

        Ok(SmcRun {
            particles,
            eps,
            rounds,
            moves,
            n_sim_total,
            n_state_pre,
            termination,
            pairs,
        })
    }

    /// Applies `moves` MH steps to an alive particle. Returns the moved
    /// particle, the step records, and predictions made outside the steps.
    fn move_particle(
        &self,
        ctx: &StepContext<'_>,
        p: &Particle,
        rng: &RngStream,
    ) -> Result<(Particle, Vec<IterationRecord>, usize)> {
        if p.weight <= 0.0 {
            return Ok((p.clone(), Vec::new(), 0));
        }
        let mut extra_pre = 0;
        let (h_val, kern_h) = if ctx.kind == SamplerKind::EjMcmc {
            let h = match p.h {
                Some(h) => h,
                None => {
                    extra_pre += 1;
                    self.bound.expect("checked in run").bound(&p.theta)?
                }
            };
            (Some(h), ctx.kernel.weight(h.max(0.0), ctx.eps))
        } else {
            (None, 1.0)
        };
        let mut state = ChainState {
            theta: p.theta.clone(),
            ln_prior: self.prior.ln_density(&p.theta),
            delta: p.delta,
            h_val,
            kern_delta: ctx.kernel.weight(p.delta, ctx.eps),
            kern_h,
        };
        let mut chain_rng = rng.clone();
        let mut trace = Vec::with_capacity(self.cfg.moves);
        for m in 0..self.cfg.moves {
            let (next, rec) = mh_step(ctx, &state, m, &mut chain_rng)?;
            state = next;
            trace.push(rec);
        }
        Ok((
            Particle {
                theta: state.theta,
                delta: state.delta,
                weight: p.weight,
                h: state.h_val,
            },
            trace,
            extra_pre,
        ))
    }
}

/// ABC-SMC with OejMCMC or ejMCMC moves; `bound` is required for ejMCMC.
pub fn run_ejasmc(
    cfg: &SmcConfig,
    prior: &dyn Prior,
    model: &dyn AbcModel,
    bound: Option<&dyn DiscrepancyBound>,
    rng: &RngStream,
) -> Result<SmcRun> {
    Runner {
        cfg,
        prior,
        model,
        bound,
        record: false,
        budget: cfg.budget.map(Budget::Simulations),
    }
    .run(rng)
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub data: DiscrepancySet,
    /// `false` when the stopping rule ended the pilot before `budget`
    /// pairs were collected.
    pub complete: bool,
    pub rounds: Vec<RoundReport>,
    pub n_sim_total: usize,
}

/// Pilot ABC-SMC with OejMCMC moves that records every simulated
/// `(theta, Delta)` pair until `budget` pairs are collected.
pub fn collect_training_data(
    cfg: &SmcConfig,
    budget: usize,
    prior: &dyn Prior,
    model: &dyn AbcModel,
    rng: &RngStream,
) -> Result<TrainingRun> {
    if budget < crate::gp::MIN_TRAINING_SIZE {
        return invalid(format!(
            "training budget must be at least {}",
            crate::gp::MIN_TRAINING_SIZE
        ));
    }
    let pilot_cfg = SmcConfig {
        move_kind: SamplerKind::OejMcmc,
        budget: None,
        max_rounds: cfg.max_rounds.or(Some(10_000)),
        ..cfg.clone()
    };
    let run = Runner {
        cfg: &pilot_cfg,
        prior,
        model,
        bound: None,
        record: true,
        budget: Some(Budget::Pairs(budget)),
    }
    .run(rng)?;
    let mut pairs = run.pairs;
    let complete = pairs.len() >= budget;
    if !complete {
        log::warn!(
            "pilot stopped ({:?}) after {} of {budget} training pairs",
            run.termination,
            pairs.len()
        );
    }
    pairs.truncate(budget);
    Ok(TrainingRun {
        data: DiscrepancySet::new(pairs)?,
        complete,
        rounds: run.rounds,
        n_sim_total: run.n_sim_total,
    })
}

/// Training pairs from independent prior draws, one simulation each;
/// failed simulations are skipped and redrawn.
pub fn collect_prior_training(
    budget: usize,
    prior: &dyn Prior,
    model: &dyn AbcModel,
    rng: &RngStream,
) -> Result<DiscrepancySet> {
    if budget < crate::gp::MIN_TRAINING_SIZE {
        return invalid(format!(
            "training budget must be at least {}",
            crate::gp::MIN_TRAINING_SIZE
        ));
    }
    let max_attempts = 20 * budget;
    let mut pairs: Vec<(ParamVector, f64)> = Vec::with_capacity(budget);
    let mut next = 0usize;
    while pairs.len() < budget && next < max_attempts {
        let batch = (budget - pairs.len()).min(max_attempts - next);
        let drawn: Vec<Option<(ParamVector, f64)>> = (next..next + batch)
            .into_par_iter()
            .map(|i| {
                let mut r = rng.fork(i as u64);
                let theta = prior.sample(&mut r);
                let d = simulate_or_inf(model, &theta, &mut r);
                d.is_finite().then_some((theta, d))
            })
            .collect();
        pairs.extend(drawn.into_iter().flatten());
        next += batch;
    }
    if pairs.len() < budget {
        return Err(Error::NumericalFailure(format!(
            "only {} of {budget} prior simulations succeeded",
            pairs.len()
        )));
    }
    DiscrepancySet::new(pairs)
}
