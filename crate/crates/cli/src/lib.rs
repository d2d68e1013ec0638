//! Config-driven experiment runner: pilot run, GP fit, sampler, metrics
//! and plot-ready CSV output.

pub mod config;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod plotdata;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use config::{ConfigError, ExperimentConfig};
pub use pipeline::Experiment;

#[derive(Debug, Parser)]
#[command(name = "ejabc", version, about = "ABC samplers with early rejection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for particles and chains (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; takes precedence over EJABC_OUT and the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pilot, GP fit, sampler and metrics in one go.
    Run(Common),
    /// Collect GP training pairs.
    Pilot(Common),
    /// Fit the discrepancy GP to the training pairs.
    FitGp(Common),
    /// Run the MCMC sampler.
    Sample(Common),
    /// Run ABC-SMC.
    Smc(Common),
    /// Summarize the sampler output.
    Metrics(Common),
    /// Write plot-ready CSVs.
    Plotdata {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    MarginalDensity,
    Trace,
    #[value(name = "scatter2d")]
    Scatter2d,
    #[value(name = "gp_fit_1d")]
    GpFit1d,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::MarginalDensity => "marginal_density",
            Self::Trace => "trace",
            Self::Scatter2d => "scatter2d",
            Self::GpFit1d => "gp_fit_1d",
        }
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Run(_) => "run",
            Self::Pilot(_) => "pilot",
            Self::FitGp(_) => "fit-gp",
            Self::Sample(_) => "sample",
            Self::Smc(_) => "smc",
            Self::Metrics(_) => "metrics",
            Self::Plotdata { .. } => "plotdata",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Self::Run(c)
            | Self::Pilot(c)
            | Self::FitGp(c)
            | Self::Sample(c)
            | Self::Smc(c)
            | Self::Metrics(c) => c,
            Self::Plotdata { common, .. } => common,
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit code 1).
    Validation(String),
    /// A required artifact is missing (exit code 2).
    NotFound(String),
    /// A phase failed while running (exit code 2).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::NotFound(_) | Self::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Validation(m) => write!(f, "invalid configuration: {m}"),
            Self::NotFound(m) => write!(f, "not found: {m}"),
            Self::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        Self::Validation(e.0)
    }
}

impl From<ejabc::Error> for CliError {
    fn from(e: ejabc::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let common = command.common();
    if let Some(n) = common.workers {
        if n == 0 {
            return Err(CliError::Validation("--workers must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::debug!("thread pool already initialized: {e}");
        }
    }
    let env_out = std::env::var_os("EJABC_OUT").map(PathBuf::from);
    let exp = Experiment::load(&common.config, common.seed, common.out.clone(), env_out)?;
    pipeline::run_command(&exp, command)
}
