//! Experiment phases. Every phase reads its inputs from the output
//! directory (or from files named in the config), so phases can be rerun
//! one at a time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ejabc::mcmc::{run_chains, write_samples_csv, write_trace_csv, ChainOutput, SamplerKind, StepContext};
use ejabc::simulators::{
    generate_observed, load_blowfly_data, read_observed_csv, write_observed_csv, AbcProblem, ObservedData,
    SimulatorSpec,
};
use ejabc::smc::{collect_prior_training, collect_training_data, run_ejasmc, write_rounds_csv, SmcConfig, SmcRun};
use ejabc::{
    fit_gp, Dataset, DiscrepancyBound, DiscrepancySet, GpModel, GpQuantile, ParamVector, PriorSpec, ProposalSpec,
    AbcModel as _, RngStream,
};
use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, McmcConfig, ObservedSource, PilotMethod, ProposalConfig, SamplerBlock};
use crate::manifest::Manifest;
use crate::{metrics, plotdata, CliError, Command};

pub const OBSERVED_FILE: &str = "observed.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const PILOT_ROUNDS_FILE: &str = "pilot_rounds.csv";
pub const GP_FILE: &str = "gp_model.json";
pub const PARTICLES_FILE: &str = "particles.csv";
pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SMC_SUMMARY_FILE: &str = "smc_summary.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Random streams of the phases, all derived from the experiment seed.
const PILOT_STREAM: u64 = 1;
const GP_STREAM: u64 = 2;
const SAMPLER_STREAM: u64 = 3;

/// Trace file of chain `c` (0-based); a single chain uses `trace.csv`.
pub fn trace_file(c: usize, chains: usize) -> String {
    if chains == 1 {
        "trace.csv".into()
    } else {
        format!("trace_chain{}.csv", c + 1)
    }
}

pub fn samples_file(c: usize, chains: usize) -> String {
    if chains == 1 {
        "samples.csv".into()
    } else {
        format!("samples_chain{}.csv", c + 1)
    }
}

/// A validated configuration with its observed data and output location.
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub out: PathBuf,
    pub prior: PriorSpec,
    pub observed: ObservedData,
    pub problem: AbcProblem<SimulatorSpec>,
}

impl Experiment {
    /// Output directory precedence: `out_flag`, then `env_out`, then the
    /// config's `output_dir`.
    pub fn load(
        path: &Path,
        seed: Option<u64>,
        out_flag: Option<PathBuf>,
        env_out: Option<PathBuf>,
    ) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let cfg = ExperimentConfig::load(path)?;
        let out = out_flag
            .or(env_out)
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| {
                CliError::Validation("no output directory: pass --out, set EJABC_OUT or output_dir".into())
            })?;
        let seed = seed.unwrap_or(cfg.seed);
        let prior = cfg.prior_spec()?;
        let observed = load_observed(&cfg)?;
        let discrepancy = cfg.discrepancy_kind().build(&observed.data);
        let problem = AbcProblem::new(cfg.model.clone(), observed.data.clone(), discrepancy)
            .map_err(|e| CliError::Validation(format!("observed: {e}")))?;
        Ok(Self {
            config_sha256: format!("{:x}", Sha256::digest(&bytes)),
            cfg,
            seed,
            out,
            prior,
            observed,
            problem,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn rng(&self, stream: u64) -> RngStream {
        RngStream::new(self.seed, stream)
    }

    pub fn mcmc(&self) -> Option<&McmcConfig> {
        match &self.cfg.sampler {
            SamplerBlock::Mcmc(m) => Some(m),
            SamplerBlock::Smc(_) => None,
        }
    }

    pub fn smc(&self) -> Option<&SmcConfig> {
        match &self.cfg.sampler {
            SamplerBlock::Smc(s) => Some(s),
            SamplerBlock::Mcmc(_) => None,
        }
    }

    pub fn sampler_name(&self) -> String {
        match &self.cfg.sampler {
            SamplerBlock::Mcmc(m) => m.kind.name().to_string(),
            SamplerBlock::Smc(s) => format!("smc_{}", s.move_kind.name()),
        }
    }

    fn quantile_level(&self) -> f64 {
        self.cfg.gp.as_ref().map_or(0.05, |g| g.quantile)
    }

    /// Training pairs from `gp.training_file` or the pilot output.
    pub fn load_training(&self) -> Result<DiscrepancySet, CliError> {
        let path = self
            .cfg
            .gp
            .as_ref()
            .and_then(|g| g.training_file.clone())
            .unwrap_or_else(|| self.path(TRAINING_FILE));
        require(&path)?;
        Ok(DiscrepancySet::read_csv(&path)?)
    }

    /// Fitted GP from `gp.model_file` or the fit-gp output.
    pub fn load_gp(&self) -> Result<GpModel, CliError> {
        let path = self
            .cfg
            .gp
            .as_ref()
            .and_then(|g| g.model_file.clone())
            .unwrap_or_else(|| self.path(GP_FILE));
        require(&path)?;
        let model = GpModel::load_json(&path)?;
        if model.dim() != self.problem.param_dim() {
            return Err(CliError::Validation(format!(
                "{}: GP has {} inputs, the model has {} parameters",
                path.display(),
                model.dim(),
                self.problem.param_dim()
            )));
        }
        Ok(model)
    }
}

pub fn require(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::NotFound(path.display().to_string()))
    }
}

fn load_observed(cfg: &ExperimentConfig) -> Result<ObservedData, CliError> {
    let bad = |e: ejabc::Error| CliError::Validation(format!("observed: {e}"));
    let model_times = cfg.model.obs_times();
    match &cfg.observed {
        ObservedSource::File { path } => read_observed_csv(path).map_err(bad),
        ObservedSource::Blowfly { path } => load_blowfly_data(path).map_err(bad),
        ObservedSource::Generate { truth, seed } => {
            let truth = truth.clone().unwrap_or_else(|| cfg.model.default_truth());
            let theta = ParamVector::new(truth).map_err(bad)?;
            let data = generate_observed(&cfg.model, &theta, &mut RngStream::new(*seed, 0))
                .map_err(|e| CliError::Runtime(format!("generating observed data: {e}")))?;
            Ok(ObservedData { times: model_times, data })
        }
        ObservedSource::Inline { rows } => {
            let data = Dataset::from_rows(rows).map_err(bad)?;
            let t = data.len_time();
            let times = if model_times.len() == t {
                model_times
            } else {
                (0..t).map(|i| i as f64).collect()
            };
            Ok(ObservedData { times, data })
        }
    }
}

/// Phase timings and failure bookkeeping for one invocation.
pub struct Recorder<'a> {
    exp: &'a Experiment,
    command: &'static str,
    timings: BTreeMap<String, f64>,
}

impl<'a> Recorder<'a> {
    fn new(exp: &'a Experiment, command: &'static str) -> Self {
        Self {
            exp,
            command,
            timings: BTreeMap::new(),
        }
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        log::info!("phase {name}");
        let r = f();
        self.timings.insert(name.to_string(), t.elapsed().as_secs_f64());
        r.map_err(|e| match e {
            CliError::Runtime(m) => CliError::Runtime(format!("{name}: {m}")),
            other => other,
        })
    }

    fn finish(self, result: Result<(), CliError>) -> Result<(), CliError> {
        let manifest = Manifest::collect(self.exp, self.command, self.timings, result.as_ref().err());
        match manifest.and_then(|m| m.write(&self.exp.path(MANIFEST_FILE))) {
            Ok(()) => result,
            Err(e) => result.and(Err(e)),
        }
    }
}

pub fn run_command(exp: &Experiment, command: &Command) -> Result<(), CliError> {
    std::fs::create_dir_all(&exp.out)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", exp.out.display())))?;
    let mut rec = Recorder::new(exp, command.name());
    let result = dispatch(exp, command, &mut rec);
    rec.finish(result)?;
    println!("{}", exp.path(MANIFEST_FILE).display());
    Ok(())
}

fn dispatch(exp: &Experiment, command: &Command, rec: &mut Recorder) -> Result<(), CliError> {
    match command {
        Command::Run(_) => {
            write_observed(exp)?;
            let training = if exp.cfg.needs_pilot() {
                Some(rec.phase("pilot", || pilot(exp))?)
            } else if exp.cfg.gp.as_ref().is_some_and(|g| g.training_file.is_some()) {
                Some(exp.load_training()?)
            } else {
                None
            };
            let gp = if exp.cfg.uses_surrogate() {
                let has_file = exp.cfg.gp.as_ref().is_some_and(|g| g.model_file.is_some());
                Some(Arc::new(if has_file {
                    exp.load_gp()?
                } else {
                    let train = training.as_ref().expect("pilot or training file is required");
                    rec.phase("fit_gp", || fit(exp, train))?
                }))
            } else {
                None
            };
            if exp.mcmc().is_some() {
                rec.phase("sample", || sample(exp, gp, training.as_ref()).map(drop))?;
            } else {
                rec.phase("smc", || smc(exp, gp).map(drop))?;
            }
            rec.phase("metrics", || metrics::write_metrics(exp))
        }
        Command::Pilot(_) => {
            if exp.cfg.pilot.is_none() {
                return Err(CliError::Validation("pilot: no pilot block in the configuration".into()));
            }
            write_observed(exp)?;
            rec.phase("pilot", || pilot(exp).map(drop))
        }
        Command::FitGp(_) => {
            let train = exp.load_training()?;
            rec.phase("fit_gp", || fit(exp, &train).map(drop))
        }
        Command::Sample(_) => {
            let m = exp
                .mcmc()
                .ok_or_else(|| CliError::Validation("sampler: `sample` needs an mcmc sampler".into()))?;
            write_observed(exp)?;
            let gp = if m.kind == SamplerKind::EjMcmc {
                Some(Arc::new(exp.load_gp()?))
            } else {
                None
            };
            let training = match m.proposal {
                ProposalConfig::Training { .. } => Some(exp.load_training()?),
                _ => exp.load_training().ok(),
            };
            rec.phase("sample", || sample(exp, gp, training.as_ref()).map(drop))
        }
        Command::Smc(_) => {
            let s = exp
                .smc()
                .ok_or_else(|| CliError::Validation("sampler: `smc` needs an smc sampler".into()))?;
            write_observed(exp)?;
            let gp = if s.move_kind == SamplerKind::EjMcmc {
                Some(Arc::new(exp.load_gp()?))
            } else {
                None
            };
            rec.phase("smc", || smc(exp, gp).map(drop))
        }
        Command::Metrics(_) => rec.phase("metrics", || metrics::write_metrics(exp)),
        Command::Plotdata { kind, .. } => rec.phase("plotdata", || plotdata::emit(exp, *kind).map(drop)),
    }
}

fn write_observed(exp: &Experiment) -> Result<(), CliError> {
    Ok(write_observed_csv(exp.path(OBSERVED_FILE), &exp.observed)?)
}

/// Collects training pairs and writes `training.csv`.
pub fn pilot(exp: &Experiment) -> Result<DiscrepancySet, CliError> {
    let pilot = exp
        .cfg
        .pilot
        .as_ref()
        .ok_or_else(|| CliError::Validation("pilot: missing".into()))?;
    let rng = exp.rng(PILOT_STREAM);
    let data = match pilot.method {
        PilotMethod::Smc => {
            let cfg = pilot.smc.clone().unwrap_or_default();
            let run = collect_training_data(&cfg, pilot.budget, &exp.prior, &exp.problem, &rng)?;
            write_rounds_csv(exp.path(PILOT_ROUNDS_FILE), &run.rounds)?;
            run.data
        }
        PilotMethod::Prior => collect_prior_training(pilot.budget, &exp.prior, &exp.problem, &rng)?,
    };
    data.write_csv(exp.path(TRAINING_FILE))?;
    Ok(data)
}

/// Fits the GP and writes `gp_model.json`.
pub fn fit(exp: &Experiment, train: &DiscrepancySet) -> Result<GpModel, CliError> {
    if train.dim() != Some(exp.problem.param_dim()) {
        return Err(CliError::Validation(format!(
            "training data has dimension {:?}, the model has {} parameters",
            train.dim(),
            exp.problem.param_dim()
        )));
    }
    let cfg = exp.cfg.gp.clone().unwrap_or_default().config;
    let model = fit_gp(train, &cfg, &exp.rng(GP_STREAM))?;
    model.save_json(exp.path(GP_FILE))?;
    Ok(model)
}

/// Covariance of the parameters with the lowest `fraction` of
/// discrepancies, times `scale`, plus a small ridge.
pub fn proposal_from_training(train: &DiscrepancySet, fraction: f64, scale: f64) -> Result<ProposalSpec, CliError> {
    let mut recs: Vec<&(ParamVector, f64)> = train.records().iter().collect();
    recs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let p = recs.first().map_or(0, |r| r.0.dim());
    let keep = ((fraction * recs.len() as f64).ceil() as usize).max(p + 1);
    if keep > recs.len() || keep < 2 {
        return Err(CliError::Runtime(format!(
            "training-based proposal needs at least {} pairs, have {}",
            keep.max(2),
            recs.len()
        )));
    }
    let sel = &recs[..keep];
    let n = sel.len() as f64;
    let mean: Vec<f64> = (0..p).map(|j| sel.iter().map(|r| r.0[j]).sum::<f64>() / n).collect();
    let mut cov = DMatrix::<f64>::zeros(p, p);
    for r in sel {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += scale * (r.0[i] - mean[i]) * (r.0[j] - mean[j]) / (n - 1.0);
            }
        }
    }
    let ridge = 1e-10 * cov.trace() / p as f64;
    for i in 0..p {
        cov[(i, i)] += ridge.max(f64::MIN_POSITIVE);
    }
    Ok(ProposalSpec::new(cov)?)
}

fn build_proposal(m: &McmcConfig, training: Option<&DiscrepancySet>) -> Result<ProposalSpec, CliError> {
    match &m.proposal {
        ProposalConfig::Sd(sd) => Ok(ProposalSpec::from_sd(sd)?),
        ProposalConfig::Covariance(rows) => {
            let p = rows.len();
            let cov = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
            ProposalSpec::new(cov).map_err(|e| CliError::Validation(format!("sampler.mcmc.proposal: {e}")))
        }
        ProposalConfig::Training { fraction, scale } => {
            let train = training.ok_or_else(|| CliError::NotFound(TRAINING_FILE.into()))?;
            proposal_from_training(train, *fraction, *scale)
        }
    }
}

/// Runs the MCMC chains and writes one trace and one sample file per
/// chain.
pub fn sample(
    exp: &Experiment,
    gp: Option<Arc<GpModel>>,
    training: Option<&DiscrepancySet>,
) -> Result<Vec<ChainOutput>, CliError> {
    let m = exp.mcmc().expect("mcmc sampler");
    let proposal = build_proposal(m, training)?;
    let bound = match (m.kind, gp) {
        (SamplerKind::EjMcmc, Some(model)) => Some(GpQuantile::new(model, exp.quantile_level())?),
        (SamplerKind::EjMcmc, None) => return Err(CliError::NotFound(GP_FILE.into())),
        _ => None,
    };
    // start at the configured point, else the best training parameter
    let init = match &m.init {
        Some(v) => Some(ParamVector::new(v.clone())?),
        None => training.and_then(|t| {
            t.records()
                .iter()
                .filter(|(th, _)| exp.prior.marginals().len() == th.dim())
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(th, _)| th.clone())
        }),
    };
    let ctx = StepContext {
        kind: m.kind,
        kernel: m.kernel,
        eps: m.eps,
        prior: &exp.prior,
        proposal: &proposal,
        model: &exp.problem,
        bound: bound.as_ref().map(|b| b as &dyn DiscrepancyBound),
    };
    let chains = run_chains(&ctx, m.chains, m.iterations, init.as_ref(), &exp.rng(SAMPLER_STREAM))?;
    for (c, out) in chains.iter().enumerate() {
        write_trace_csv(exp.path(&trace_file(c, m.chains)), &out.trace)?;
        write_samples_csv(exp.path(&samples_file(c, m.chains)), &out.samples)?;
    }
    Ok(chains)
}

/// Summary of an SMC run kept next to the particles.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmcSummary {
    /// Final tolerance; `None` if the run never left `eps = inf`.
    pub eps: Option<f64>,
    pub rounds: usize,
    pub termination: ejabc::smc::Termination,
    pub n_sim_total: usize,
    /// Surrogate predictions at particles (not counted in `moves.n_pre`).
    pub n_state_pre: usize,
    pub moves: ejabc::diagnostics::EffSummary,
    pub efficiency: f64,
}

impl SmcSummary {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        require(path)?;
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Runs ABC-SMC and writes particles, per-round reports and a summary.
pub fn smc(exp: &Experiment, gp: Option<Arc<GpModel>>) -> Result<SmcRun, CliError> {
    let cfg = exp.smc().expect("smc sampler");
    let bound = match (cfg.move_kind, gp) {
        (SamplerKind::EjMcmc, Some(model)) => Some(GpQuantile::new(model, exp.quantile_level())?),
        (SamplerKind::EjMcmc, None) => return Err(CliError::NotFound(GP_FILE.into())),
        _ => None,
    };
    let run = run_ejasmc(
        cfg,
        &exp.prior,
        &exp.problem,
        bound.as_ref().map(|b| b as &dyn DiscrepancyBound),
        &exp.rng(SAMPLER_STREAM),
    )?;
    run.particles.write_csv(exp.path(PARTICLES_FILE))?;
    write_rounds_csv(exp.path(ROUNDS_FILE), &run.rounds)?;
    let summary = SmcSummary {
        eps: run.eps.is_finite().then_some(run.eps),
        rounds: run.rounds.len(),
        termination: run.termination.clone(),
        n_sim_total: run.n_sim_total,
        n_state_pre: run.n_state_pre,
        moves: run.moves,
        efficiency: run.efficiency(),
    };
    std::fs::write(exp.path(SMC_SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(run)
}
