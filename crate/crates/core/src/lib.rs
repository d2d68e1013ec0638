//! Likelihood-free Bayesian inference with early-rejection ABC-MCMC.
//!
//! The crate provides ABC kernels and discrepancies, product priors and
//! Gaussian random-walk proposals, a Gaussian-process discrepancy
//! surrogate, plain/early-rejection/GP-early-rejection ABC-MCMC samplers,
//! adaptive ABC-SMC, four benchmark simulators and diagnostics.

pub mod data;

pub mod diagnostics;
pub mod discrepancy;
pub mod error;
pub mod gp;
pub mod io;
pub mod kernel;

pub mod mcmc;
pub mod model;
pub mod prior;
pub mod rng;


pub mod simulators;
pub mod smc;
pub mod stats;

pub use data::{Dataset, ParamVector};
pub use discrepancy::{abs_discrepancy, rmse_discrepancy, Discrepancy};
pub use error::{Error, Result, SimulationError};
pub use gp::{fit_gp, DiscrepancySet, GpConfig, GpModel, GpQuantile};
pub use kernel::{kernel_eval, KernelSpec};
pub use model::{AbcModel, ConstantBound, DiscrepancyBound};
pub use prior::{prior_logdensity, Marginal, Prior, PriorSpec, Proposal, ProposalSpec};
pub use rng::RngStream;
