//! Benchmark forward models behind one interface: given `theta` and a
//! random stream, produce a `d x T` dataset.

mod dde;
mod observed;
mod ode;
mod sde;
mod toy;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ParamVector};
use crate::discrepancy::{AbsDiff, Discrepancy, MinMaxRmse, Rmse};
use crate::error::{Result, SimulationError};
use crate::model::AbcModel;
use crate::rng::RngStream;

pub use dde::{dde_trajectory, simulate_dde, DdeNoise, DdeSpec};
pub use observed::{load_blowfly_data, read_observed_csv, write_observed_csv, ObservedData};
pub use ode::{ode_rhs, ode_trajectory, simulate_ode, OdeSpec};
pub use sde::{sde_euler_step, sde_propensities, simulate_sde, SdeScenario, SdeSpec, STOICHIOMETRY};
pub use toy::{simulate_toy, ToySpec, TOY_COMPONENT_VAR, TOY_OBSERVATION};

pub trait Simulator: Send + Sync {
    fn param_dim(&self) -> usize;

    /// `(d, T)` of the produced dataset.
    fn data_dims(&self) -> (usize, usize);

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<Dataset, SimulationError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulatorSpec {
    ToyMixture(ToySpec),
    OdeSystem(OdeSpec),
    SdeNetwork(SdeSpec),
    DdeBlowfly(DdeSpec),
}

impl SimulatorSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ToyMixture(_) => Ok(()),
            Self::OdeSystem(s) => s.validate(),
            Self::SdeNetwork(s) => s.validate(),
            Self::DdeBlowfly(s) => s.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ToyMixture(_) => "toy_mixture",
            Self::OdeSystem(_) => "ode_system",
            Self::SdeNetwork(_) => "sde_network",
            Self::DdeBlowfly(_) => "dde_blowfly",
        }
    }

    /// Observation times of the produced dataset (`[0]` for the toy model).
    pub fn obs_times(&self) -> Vec<f64> {
        match self {
            Self::ToyMixture(_) => vec![0.0],
            Self::OdeSystem(s) => s.obs_times(),
            Self::SdeNetwork(s) => s.obs_times.clone(),
            Self::DdeBlowfly(s) => s.obs_times.clone(),
        }
    }

    /// Parameter value used to generate synthetic observations when none
    /// is configured.
    pub fn default_truth(&self) -> Vec<f64> {
        match self {
            Self::ToyMixture(_) => vec![0.0],
            Self::OdeSystem(_) => vec![2.0, 1.0],
            Self::SdeNetwork(s) => s.default_truth(),
            Self::DdeBlowfly(s) => s.default_truth(),
        }
    }

    pub fn default_discrepancy(&self) -> DiscrepancyKind {
        match self {
            Self::ToyMixture(_) => DiscrepancyKind::Abs,
            Self::OdeSystem(_) | Self::DdeBlowfly(_) => DiscrepancyKind::Rmse,
            Self::SdeNetwork(_) => DiscrepancyKind::MinMaxRmse,
        }
    }

    fn inner(&self) -> &dyn Simulator {
        match self {
            Self::ToyMixture(s) => s,
            Self::OdeSystem(s) => s,
            Self::SdeNetwork(s) => s,
            Self::DdeBlowfly(s) => s,
        }
    }
}

impl Simulator for SimulatorSpec {
    fn param_dim(&self) -> usize {
        self.inner().param_dim()
    }

    fn data_dims(&self) -> (usize, usize) {
        self.inner().data_dims()
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<Dataset, SimulationError> {
        self.inner().simulate(theta, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyKind {
    Abs,
    Rmse,
    /// RMSE after per-row min-max scaling fitted on the observed data.
    MinMaxRmse,
}

impl DiscrepancyKind {
    pub fn build(self, observed: &Dataset) -> Box<dyn Discrepancy> {
        match self {
            Self::Abs => Box::new(AbsDiff),
            Self::Rmse => Box::new(Rmse),
            Self::MinMaxRmse => Box::new(MinMaxRmse::from_reference(observed)),
        }
    }
}

/// A simulator paired with observed data and a discrepancy.
pub struct AbcProblem<S> {
    simulator: S,
    observed: Dataset,
    discrepancy: Box<dyn Discrepancy>,
}

impl<S: Simulator> AbcProblem<S> {
    pub fn new(simulator: S, observed: Dataset, discrepancy: Box<dyn Discrepancy>) -> Result<Self> {
        if simulator.data_dims() != observed.dims() {
            return crate::error::invalid(format!(
                "observed data is {:?} but the simulator produces {:?}",
                observed.dims(),
                simulator.data_dims()
            ));
        }
        Ok(Self {
            simulator,
            observed,
            discrepancy,
        })
    }

    pub fn simulator(&self) -> &S {
        &self.simulator
    }

    pub fn observed(&self) -> &Dataset {
        &self.observed
    }
}

impl<S: Simulator> AbcModel for AbcProblem<S> {
    fn param_dim(&self) -> usize {
        self.simulator.param_dim()
    }

    fn simulate_discrepancy(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<f64, SimulationError> {
        let x = self.simulator.simulate(theta, rng)?;
        let d = self
            .discrepancy
            .distance(&x, &self.observed)
            .map_err(|e| SimulationError::InvalidInput(e.to_string()))?;
        if d.is_nan() {
            return Err(SimulationError::NonFinite { t: f64::NAN });
        }
        Ok(d)
    }
}

/// Simulates one synthetic observed dataset at `truth`.
pub fn generate_observed<S: Simulator + ?Sized>(
    simulator: &S,
    truth: &ParamVector,
    rng: &mut RngStream,
) -> Result<Dataset> {
    Ok(simulator.simulate(truth, rng)?)
}

pub(crate) fn check_theta(
    theta: &ParamVector,
    dim: usize,
) -> std::result::Result<(), SimulationError> {
    if theta.dim() != dim {
        return Err(SimulationError::InvalidInput(format!(
            "expected {dim} parameters, got {}",
            theta.dim()
        )));
    }
    Ok(())
}

/// Number of fixed steps of size `dt` that land on time `t`, if any.
pub(crate) fn steps_to(t: f64, dt: f64) -> Option<usize> {
    let k = (t / dt).round();
    if k < 0.0 || (k * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
        None
    } else {
        Some(k as usize)
    }
}

pub(crate) fn finite_dataset(
    d: usize,
    t: usize,
    values: Vec<f64>,
) -> std::result::Result<Dataset, SimulationError> {
    Dataset::new(d, t, values).map_err(|_| SimulationError::NonFinite { t: f64::NAN })
}
