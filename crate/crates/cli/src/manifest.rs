//! `manifest.json`: what an invocation did and what the output directory
//! holds.

use std::collections::BTreeMap;
use std::path::Path;

use ejabc::diagnostics::EffSummary;
use ejabc::mcmc::read_trace_csv;
use serde::{Deserialize, Serialize};

use crate::pipeline::{trace_file, Experiment, SmcSummary, MANIFEST_FILE, SMC_SUMMARY_FILE};
use crate::CliError;

pub const MANIFEST_SCHEMA: u32 = 1;

/// Sampler counters with the column names used in result tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct Counters {
    pub N_ite: usize,
    pub N_pre: usize,
    pub N_sim: usize,
    pub N_acc: usize,
    pub Eff: f64,
    pub n_early1: usize,
    pub n_early2: usize,
    pub n_sim_reject: usize,
    pub n_failed: usize,
}

impl From<EffSummary> for Counters {
    fn from(s: EffSummary) -> Self {
        Self {
            N_ite: s.n_iter,
            N_pre: s.n_pre,
            N_sim: s.n_sim,
            N_acc: s.n_accept,
            Eff: s.efficiency(),
            n_early1: s.n_early1,
            n_early2: s.n_early2,
            n_sim_reject: s.n_sim_reject,
            n_failed: s.n_failed,
        }
    }
}

impl Counters {
    /// `N_ite = early1 + early2 + sim rejections + accepts`,
    /// `N_sim <= N_ite`, `N_pre <= N_ite`.
    pub fn consistent(&self) -> bool {
        self.N_ite == self.n_early1 + self.n_early2 + self.n_sim_reject + self.N_acc
            && self.N_sim <= self.N_ite
            && self.N_pre <= self.N_ite
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub name: Option<String>,
    pub model: String,
    pub sampler: String,
    pub config_sha256: String,
    pub seed: u64,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
    /// Wall-clock seconds per phase run by this invocation.
    pub timings: BTreeMap<String, f64>,
    /// Files in the output directory, sorted.
    pub artifacts: Vec<String>,
    /// Counters of the sampler output present in the directory (all
    /// chains pooled; SMC move steps only).
    pub counters: Option<Counters>,
}

/// Counters from the traces (MCMC) or SMC summary in the output dir.
pub fn counters_from_dir(exp: &Experiment) -> Result<Option<EffSummary>, CliError> {
    if let Some(m) = exp.mcmc() {
        let mut total = EffSummary::default();
        for c in 0..m.chains {
            let path = exp.path(&trace_file(c, m.chains));
            if !path.is_file() {
                return Ok(None);
            }
            total = total.merge(&EffSummary::from_trace(&read_trace_csv(&path)?));
        }
        Ok(Some(total))
    } else {
        let path = exp.path(SMC_SUMMARY_FILE);
        if !path.is_file() {
            return Ok(None);
        }
        Ok(Some(SmcSummary::read(&path)?.moves))
    }
}

fn list_artifacts(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut names = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != MANIFEST_FILE {
                names.push(name);
            }
        }
    }
    names.sort();
    Ok(names)
}

impl Manifest {
    pub fn collect(
        exp: &Experiment,
        command: &str,
        timings: BTreeMap<String, f64>,
        error: Option<&CliError>,
    ) -> Result<Self, CliError> {
        // a failed run may leave unreadable partial traces
        let counters = match counters_from_dir(exp) {
            Ok(c) => c.map(Counters::from),
            Err(e) if error.is_some() => {
                log::warn!("counters unavailable: {e}");
                None
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            schema_version: MANIFEST_SCHEMA,
            command: command.to_string(),
            name: exp.cfg.name.clone(),
            model: exp.cfg.model.name().to_string(),
            sampler: exp.sampler_name(),
            config_sha256: exp.config_sha256.clone(),
            seed: exp.seed,
            status: if error.is_some() { "failed" } else { "ok" }.to_string(),
            error: error.map(ToString::to_string),
            timings,
            artifacts: list_artifacts(&exp.out)?,
            counters,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        crate::pipeline::require(path)?;
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
