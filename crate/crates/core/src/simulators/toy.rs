use serde::{Deserialize, Serialize};

use super::{check_theta, finite_dataset, Simulator};
use crate::data::{Dataset, ParamVector};
use crate::error::SimulationError;
use crate::rng::RngStream;

/// Variance (not standard deviation) of each mixture component.
pub const TOY_COMPONENT_VAR: f64 = 0.6;
/// The single observation the toy posterior is conditioned on.
pub const TOY_OBSERVATION: f64 = 1.0;

/// `x ~ 0.5 N(theta + 2, 0.6) + 0.5 N(theta - 1, 0.6)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySpec {}

pub fn simulate_toy(
    theta: &ParamVector,
    rng: &mut RngStream,
) -> Result<Dataset, SimulationError> {
    check_theta(theta, 1)?;
    let shift = if rng.uniform() < 0.5 { 2.0 } else { -1.0 };
    let x = theta[0] + shift + TOY_COMPONENT_VAR.sqrt() * rng.standard_normal();
    finite_dataset(1, 1, vec![x])
}

impl Simulator for ToySpec {
    fn param_dim(&self) -> usize {
        1
    }

    fn data_dims(&self) -> (usize, usize) {
        (1, 1)
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<Dataset, SimulationError> {
        simulate_toy(theta, rng)
    }
}
