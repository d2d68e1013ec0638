//! Experiment configuration files (JSON, `schema_version` 1).

use std::fmt;
use std::path::{Path, PathBuf};

use ejabc::mcmc::SamplerKind;
use ejabc::simulators::{DiscrepancyKind, SimulatorSpec};
use ejabc::smc::SmcConfig;
use ejabc::simulators::Simulator as _;
use ejabc::{GpConfig, KernelSpec, Marginal, PriorSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub model: SimulatorSpec,
    pub prior: Vec<Marginal>,
    pub observed: ObservedSource,
    /// Defaults to the model's usual discrepancy.
    #[serde(default)]
    pub discrepancy: Option<DiscrepancyKind>,
    pub sampler: SamplerBlock,
    #[serde(default)]
    pub pilot: Option<PilotConfig>,
    #[serde(default)]
    pub gp: Option<GpBlock>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservedSource {
    /// `time,value_1..value_d` CSV.
    File { path: PathBuf },
    /// Blowfly `time,count` CSV with 137 rows.
    Blowfly { path: PathBuf },
    /// Simulate once at `truth` (model default when absent).
    Generate {
        #[serde(default)]
        truth: Option<Vec<f64>>,
        seed: u64,
    },
    /// Rows are coordinates, columns are observation times.
    Inline { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerBlock {
    Mcmc(McmcConfig),
    Smc(SmcConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcConfig {
    pub kind: SamplerKind,
    #[serde(default = "uniform_kernel")]
    pub kernel: KernelSpec,
    pub eps: f64,
    pub iterations: usize,
    #[serde(default = "one")]
    pub chains: usize,
    pub proposal: ProposalConfig,
    /// Starting point; otherwise prior draws until one has positive weight.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProposalConfig {
    /// Independent Gaussian steps.
    Sd(Vec<f64>),
    Covariance(Vec<Vec<f64>>),
    /// `scale` times the covariance of the training parameters with the
    /// lowest `fraction` of discrepancies.
    Training {
        fraction: f64,
        #[serde(default = "unit")]
        scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotMethod {
    /// ABC-SMC with OejMCMC moves, recording every simulated pair.
    Smc,
    /// Independent prior draws.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    pub method: PilotMethod,
    pub budget: usize,
    #[serde(default)]
    pub smc: Option<SmcConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpBlock {
    #[serde(default)]
    pub config: GpConfig,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
    /// Fitted model to load instead of training one.
    #[serde(default)]
    pub model_file: Option<PathBuf>,
    /// Training pairs to use instead of a pilot run.
    #[serde(default)]
    pub training_file: Option<PathBuf>,
}

impl Default for GpBlock {
    fn default() -> Self {
        Self {
            config: GpConfig::default(),
            quantile: default_quantile(),
            model_file: None,
            training_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Leading chain states dropped before summaries.
    pub burn_in: usize,
    /// Reference posterior samples CSV (`theta_1..theta_p`) for L1 distances.
    pub reference_samples: Option<PathBuf>,
    /// Grid points for density estimates.
    pub grid_points: Option<usize>,
}

fn uniform_kernel() -> KernelSpec {
    KernelSpec::Uniform
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_quantile() -> f64 {
    0.05
}

/// Problems found while loading or checking a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses and validates. Relative paths inside the file are resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validation; errors name the field path and the
    /// line and column.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            let field = e.path().to_string();
            let field = if field == "." { "<root>".to_string() } else { field };
            // serde_json appends "at line L column C"
            ConfigError(format!("{field}: {inner}"))
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.observed {
            ObservedSource::File { path } | ObservedSource::Blowfly { path } => fix(path),
            _ => {}
        }
        if let Some(gp) = &mut self.gp {
            gp.model_file.as_mut().map(fix);
            gp.training_file.as_mut().map(fix);
        }
        self.metrics.reference_samples.as_mut().map(fix);
        self.output_dir.as_mut().map(fix);
    }

    pub fn prior_spec(&self) -> Result<PriorSpec, ConfigError> {
        PriorSpec::new(self.prior.clone()).map_err(|e| ConfigError(format!("prior: {e}")))
    }

    pub fn discrepancy_kind(&self) -> DiscrepancyKind {
        self.discrepancy.unwrap_or_else(|| self.model.default_discrepancy())
    }

    /// Whether the sampler needs a surrogate `h`.
    pub fn uses_surrogate(&self) -> bool {
        match &self.sampler {
            SamplerBlock::Mcmc(m) => m.kind == SamplerKind::EjMcmc,
            SamplerBlock::Smc(s) => s.move_kind == SamplerKind::EjMcmc,
        }
    }

    fn proposal_needs_training(&self) -> bool {
        matches!(
            &self.sampler,
            SamplerBlock::Mcmc(McmcConfig { proposal: ProposalConfig::Training { .. }, .. })
        )
    }

    fn has_training_file(&self) -> bool {
        self.gp.as_ref().is_some_and(|g| g.training_file.is_some())
    }

    fn has_model_file(&self) -> bool {
        self.gp.as_ref().is_some_and(|g| g.model_file.is_some())
    }

    /// A pilot run is needed when an ej sampler has no fitted model or
    /// training file, or when the proposal is tuned on training pairs.
    pub fn needs_pilot(&self) -> bool {
        !self.has_training_file()
            && ((self.uses_surrogate() && !self.has_model_file()) || self.proposal_needs_training())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            ));
        }
        self.model.validate().map_err(|e| ConfigError(format!("model: {e}")))?;
        let prior = self.prior_spec()?;
        let p = self.model.param_dim();
        if prior.marginals().len() != p {
            return err(format!(
                "prior: {} marginals for a {p}-parameter model",
                prior.marginals().len()
            ));
        }
        match &self.observed {
            ObservedSource::File { path } | ObservedSource::Blowfly { path } => {
                if !path.is_file() {
                    return err(format!("observed.path: {} does not exist", path.display()));
                }
            }
            ObservedSource::Generate { truth: Some(t), .. } if t.len() != p => {
                return err(format!("observed.generate.truth: expected {p} values, got {}", t.len()));
            }
            ObservedSource::Inline { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
                    return err("observed.inline.rows: need equal-length nonempty rows".into());
                }
            }
            _ => {}
        }
        match &self.sampler {
            SamplerBlock::Mcmc(m) => {
                if !(m.eps > 0.0) {
                    return err(format!("sampler.mcmc.eps: must be positive, got {}", m.eps));
                }
                if m.iterations == 0 {
                    return err("sampler.mcmc.iterations: must be positive".into());
                }
                if m.chains == 0 {
                    return err("sampler.mcmc.chains: must be positive".into());
                }
                if let Some(init) = &m.init {
                    if init.len() != p {
                        return err(format!("sampler.mcmc.init: expected {p} values, got {}", init.len()));
                    }
                }
                match &m.proposal {
                    ProposalConfig::Sd(sd) if sd.len() != p => {
                        return err(format!("sampler.mcmc.proposal.sd: expected {p} values, got {}", sd.len()));
                    }
                    ProposalConfig::Covariance(c) if c.len() != p || c.iter().any(|r| r.len() != p) => {
                        return err(format!("sampler.mcmc.proposal.covariance: expected {p}x{p}"));
                    }
                    ProposalConfig::Training { fraction, scale }
                        if !(*fraction > 0.0 && *fraction <= 1.0 && *scale > 0.0) =>
                    {
                        return err("sampler.mcmc.proposal.training: need 0 < fraction <= 1 and scale > 0".into());
                    }
                    _ => {}
                }
            }
            SamplerBlock::Smc(s) => {
                s.validate().map_err(|e| ConfigError(format!("sampler.smc: {e}")))?;
            }
        }
        if let Some(gp) = &self.gp {
            if !(gp.quantile > 0.0 && gp.quantile < 1.0) {
                return err(format!("gp.quantile: must lie in (0, 1), got {}", gp.quantile));
            }
            for (name, f) in [("gp.model_file", &gp.model_file), ("gp.training_file", &gp.training_file)] {
                if let Some(f) = f {
                    if !f.is_file() {
                        return err(format!("{name}: {} does not exist", f.display()));
                    }
                }
            }
        }
        if let Some(r) = &self.metrics.reference_samples {
            if !r.is_file() {
                return err(format!("metrics.reference_samples: {} does not exist", r.display()));
            }
        }
        match (&self.pilot, self.needs_pilot()) {
            (None, true) => {
                return err("pilot: required for an ej sampler without gp.model_file or gp.training_file, \
                            and for proposals tuned on training data"
                    .into())
            }
            (Some(_), false) => {
                return err("pilot: not used by this configuration; remove the block".into())
            }
            (Some(pilot), true) => {
                if pilot.budget < ejabc::gp::MIN_TRAINING_SIZE {
                    return err(format!(
                        "pilot.budget: must be at least {}",
                        ejabc::gp::MIN_TRAINING_SIZE
                    ));
                }
                if let Some(smc) = &pilot.smc {
                    if pilot.method == PilotMethod::Prior {
                        return err("pilot.smc: only used with method \"smc\"".into());
                    }
                    smc.validate().map_err(|e| ConfigError(format!("pilot.smc: {e}")))?;
                }
            }
            (None, false) => {}
        }
        Ok(())
    }
}
