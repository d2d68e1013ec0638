//! Metropolis–Hastings ABC samplers sharing one trace format.
//!
//! All three samplers draw a single `w ~ U(0, 1)` per iteration and accept
//! iff `w` is below the final acceptance probability. The early-rejection
//! samplers evaluate cheap upper bounds of that probability first and stop
//! as soon as `w` exceeds one of them:
//!
//! * `abc_mcmc`: simulate, then test `r K(Delta*) / K(Delta_n)`.
//! * `oej_mcmc`: test `r / K(Delta_n)` before simulating.
//! * `ej_mcmc`: test `r / m_n`, then `r K(h*) / m_n` after one surrogate
//!   prediction, then `r min(K(Delta*), K(h*)) / m_n` after simulating,
//!   where `m_n = min(K(Delta_n), K(h_n))`.
//!
//! Here `r` is the prior-times-proposal ratio.

mod trace;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ParamVector;
use crate::error::{invalid, Error, Result};
use crate::kernel::{kernel_eval, KernelSpec};
use crate::model::{AbcModel, DiscrepancyBound};
use crate::prior::{Prior, Proposal};
use crate::rng::RngStream;

pub use trace::{read_samples_csv, read_trace_csv, write_samples_csv, write_trace_csv};

pub const INIT_RETRY_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    AbcMcmc,
    OejMcmc,
    EjMcmc,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::AbcMcmc => "abc_mcmc",
            Self::OejMcmc => "oej_mcmc",
            Self::EjMcmc => "ej_mcmc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    EarlyRejectStage1,
    EarlyRejectStage2,
    SimReject,
    Accept,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Self::EarlyRejectStage1 => "early_reject_stage1",
            Self::EarlyRejectStage2 => "early_reject_stage2",
            Self::SimReject => "sim_reject",
            Self::Accept => "accept",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::EarlyRejectStage1,
            Self::EarlyRejectStage2,
            Self::SimReject,
            Self::Accept,
        ]
        .into_iter()
        .find(|o| o.name() == s)
    }

    pub fn is_early(self) -> bool {
        matches!(self, Self::EarlyRejectStage1 | Self::EarlyRejectStage2)
    }
}

/// Current chain position with its cached kernel values. For the plain and
/// OejMCMC samplers `kern_h` is 1 so that `min(kern_delta, kern_h)` is the
/// usual `K(Delta_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: ParamVector,
    pub ln_prior: f64,
    pub delta: f64,
    pub h_val: Option<f64>,
    pub kern_delta: f64,
    pub kern_h: f64,
}

impl ChainState {
    /// `min(K(Delta_n), K(h_n))`.
    pub fn density_weight(&self) -> f64 {
        self.kern_delta.min(self.kern_h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub outcome: Outcome,
    pub theta: ParamVector,
    pub h: Option<f64>,
    /// `+inf` for a failed simulation.
    pub delta: Option<f64>,
    pub sim: bool,
    pub failed: bool,
}

/// Everything a single step needs besides the state.
pub struct StepContext<'a> {
    pub kind: SamplerKind,
    pub kernel: KernelSpec,
    pub eps: f64,
    pub prior: &'a dyn Prior,
    pub proposal: &'a dyn Proposal,
    pub model: &'a dyn AbcModel,
    /// Required for `EjMcmc`.
    pub bound: Option<&'a dyn DiscrepancyBound>,
}

impl StepContext<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.eps));
        }
        if self.kind == SamplerKind::EjMcmc && self.bound.is_none() {
            return invalid("ej_mcmc needs a discrepancy model");
        }
        if self.prior.dim() != self.model.param_dim() {
            return invalid(format!(
                "prior has dimension {} but the model expects {}",
                self.prior.dim(),
                self.model.param_dim()
            ));
        }
        Ok(())
    }

    fn kern(&self, u: f64) -> Result<f64> {
        kernel_eval(self.kernel, u, self.eps)
    }

    fn h_weight(&self, theta: &ParamVector) -> Result<(f64, f64)> {
        let bound = self
            .bound
            .ok_or_else(|| Error::InvalidArgument("ej_mcmc needs a discrepancy model".into()))?;
        let h = bound.bound(theta)?;
        if h.is_nan() {
            return Err(Error::NumericalFailure(format!("surrogate returned NaN at {theta:?}")));
        }
        Ok((h, self.kern(h.max(0.0))?))
    }

    fn simulate(&self, theta: &ParamVector, rng: &mut RngStream) -> (f64, bool) {
        match self.model.simulate_discrepancy(theta, rng) {
            Ok(d) if d >= 0.0 => (d, false),
            Ok(_) | Err(_) => (f64::INFINITY, true),
        }
    }
}

/// `r * num / den` with the conventions for a zero-density current state:
/// `+inf` when the numerator is positive, `0` otherwise.
fn mh_ratio(r: f64, num: f64, den: f64) -> f64 {
    if den > 0.0 {
        r * num / den
    } else if r * num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// One step for a given proposal and uniform draw. `sim_rng` drives the
/// simulator only.
pub fn step_with(
    ctx: &StepContext<'_>,
    state: &ChainState,
    iteration: usize,
    theta_star: ParamVector,
    w: f64,
    sim_rng: &mut RngStream,
) -> Result<(Option<ChainState>, IterationRecord)> {
    let mut rec = IterationRecord {
        iteration,
        outcome: Outcome::EarlyRejectStage1,
        theta: theta_star.clone(),
        h: None,
        delta: None,
        sim: false,
        failed: false,
    };
    let ln_prior_star = ctx.prior.ln_density(&theta_star);
    if ln_prior_star == f64::NEG_INFINITY {
        return Ok((None, rec));
    }
    let mut ln_r = ln_prior_star - state.ln_prior;
    if !ctx.proposal.is_symmetric() {
        ln_r += ctx.proposal.ln_density(&state.theta, &theta_star)
            - ctx.proposal.ln_density(&theta_star, &state.theta);
    }
    let r = ln_r.exp();
    let den = state.density_weight();

    let mut kern_h_star = 1.0;
    if ctx.kind != SamplerKind::AbcMcmc {
        if w >= mh_ratio(r, 1.0, den) {
            return Ok((None, rec));
        }
        if ctx.kind == SamplerKind::EjMcmc {
            let (h, kh) = ctx.h_weight(&theta_star)?;
            rec.h = Some(h);
            kern_h_star = kh;
            if w >= mh_ratio(r, kh, den) {
                rec.outcome = Outcome::EarlyRejectStage2;
                return Ok((None, rec));
            }
        }
    }

    let (delta, failed) = ctx.simulate(&theta_star, sim_rng);
    rec.sim = true;
    rec.failed = failed;
    rec.delta = Some(delta);
    let kd = ctx.kern(delta)?;
    if w < mh_ratio(r, kd.min(kern_h_star), den) {
        rec.outcome = Outcome::Accept;
        let next = ChainState {
            theta: theta_star,
            ln_prior: ln_prior_star,
            delta,
            h_val: rec.h,
            kern_delta: kd,
            kern_h: kern_h_star,
        };
        Ok((Some(next), rec))
    } else {
        rec.outcome = Outcome::SimReject;
        Ok((None, rec))
    }
}

/// Proposes from `rng`, draws `w` from `rng`, and simulates with a stream
/// forked from `rng` by iteration index, so coupled chains that see the
/// same proposal also see the same simulation.
pub fn mh_step(
    ctx: &StepContext<'_>,
    state: &ChainState,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, IterationRecord)> {
    let theta_star = ctx.proposal.propose(&state.theta, rng);
    let w = rng.uniform();
    let mut sim_rng = rng.fork(iteration as u64);
    let (next, rec) = step_with(ctx, state, iteration, theta_star, w, &mut sim_rng)?;
    Ok((next.unwrap_or_else(|| state.clone()), rec))
}

fn step_as(
    kind: SamplerKind,
    ctx: &StepContext<'_>,
    state: &ChainState,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, IterationRecord)> {
    let ctx = StepContext {
        kind,
        bound: ctx.bound,
        ..*ctx
    };
    mh_step(&ctx, state, iteration, rng)
}

/// Plain ABC-MCMC: always simulates a proposal inside the prior support.
pub fn abc_mcmc_step(
    state: &ChainState,
    ctx: &StepContext<'_>,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, IterationRecord)> {
    step_as(SamplerKind::AbcMcmc, ctx, state, iteration, rng)
}

/// OejMCMC: rejects before simulating when `w >= r / K(Delta_n)`.
pub fn oej_mcmc_step(
    state: &ChainState,
    ctx: &StepContext<'_>,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, IterationRecord)> {
    step_as(SamplerKind::OejMcmc, ctx, state, iteration, rng)
}

/// ejMCMC: OejMCMC's test followed by the surrogate test on `K(h(theta*))`.
pub fn ej_mcmc_step(
    state: &ChainState,
    ctx: &StepContext<'_>,
    iteration: usize,
    rng: &mut RngStream,
) -> Result<(ChainState, IterationRecord)> {
    step_as(SamplerKind::EjMcmc, ctx, state, iteration, rng)
}

/// Builds a chain state at `theta` from one simulation. Returns `None` if
/// the state has zero ABC density.
pub fn evaluate_state(
    ctx: &StepContext<'_>,
    theta: ParamVector,
    rng: &mut RngStream,
) -> Result<Option<ChainState>> {
    let ln_prior = ctx.prior.ln_density(&theta);
    if ln_prior == f64::NEG_INFINITY {
        return Ok(None);
    }
    let (h_val, kern_h) = if ctx.kind == SamplerKind::EjMcmc {
        let (h, kh) = ctx.h_weight(&theta)?;
        if kh <= 0.0 {
            return Ok(None);
        }
        (Some(h), kh)
    } else {
        (None, 1.0)
    };
    let (delta, _) = ctx.simulate(&theta, rng);
    let kern_delta = ctx.kern(delta)?;
    if kern_delta <= 0.0 {
        return Ok(None);
    }
    Ok(Some(ChainState {
        theta,
        ln_prior,
        delta,
        h_val,
        kern_delta,
        kern_h,
    }))
}

/// Finds a valid starting state: `init` first (if given), then prior draws,
/// at most `INIT_RETRY_CAP` attempts. Returns the state and the number of
/// attempts used.
pub fn initialize(
    ctx: &StepContext<'_>,
    init: Option<&ParamVector>,
    rng: &RngStream,
) -> Result<(ChainState, usize)> {
    ctx.validate()?;
    let mut init_rng = rng.fork(u64::MAX);
    for attempt in 0..INIT_RETRY_CAP {
        let theta = match (attempt, init) {
            (0, Some(t)) => {
                t.check_dim(ctx.prior.dim())?;
                t.clone()
            }
            _ => ctx.prior.sample(&mut init_rng),
        };
        if let Some(state) = evaluate_state(ctx, theta, &mut init_rng)? {
            return Ok((state, attempt + 1));
        }
    }
    Err(Error::Initialization(format!(
        "no state with positive ABC density after {INIT_RETRY_CAP} attempts"
    )))
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Post-move state after every iteration.
    pub samples: Vec<ParamVector>,
    pub trace: Vec<IterationRecord>,
    pub init_attempts: usize,
}

impl ChainOutput {
    pub fn n_simulations(&self) -> usize {
        self.trace.iter().filter(|r| r.sim).count()
    }
}

/// Runs `n_iter` iterations from a valid initial state.
pub fn run_chain(
    ctx: &StepContext<'_>,
    n_iter: usize,
    init: Option<&ParamVector>,
    rng: &RngStream,
) -> Result<ChainOutput> {
    if n_iter == 0 {
        ctx.validate()?;
        return Ok(ChainOutput {
            samples: Vec::new(),
            trace: Vec::new(),
            init_attempts: 0,
        });
    }
    let (mut state, init_attempts) = initialize(ctx, init, rng)?;
    let mut chain_rng = rng.clone();
    let mut samples = Vec::with_capacity(n_iter);
    let mut trace = Vec::with_capacity(n_iter);
    for it in 0..n_iter {
        let (next, rec) = mh_step(ctx, &state, it, &mut chain_rng)?;
        state = next;
        samples.push(state.theta.clone());
        trace.push(rec);
    }
    Ok(ChainOutput {
        samples,
        trace,
        init_attempts,
    })
}

/// Independent chains on streams forked from `rng` by chain index.
pub fn run_chains(
    ctx: &StepContext<'_>,
    n_chains: usize,
    n_iter: usize,
    init: Option<&ParamVector>,
    rng: &RngStream,
) -> Result<Vec<ChainOutput>> {
    (0..n_chains)
        .into_par_iter()
        .map(|c| run_chain(ctx, n_iter, init, &rng.fork(c as u64)))
        .collect()
}
