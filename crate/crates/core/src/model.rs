//! The two abstractions the samplers are written against: a forward model
//! that returns the discrepancy of one fresh simulation, and an optional
//! surrogate lower bound `h(theta)` on that discrepancy.

use crate::data::ParamVector;
use crate::error::{Result, SimulationError};
use crate::rng::RngStream;

pub trait AbcModel: Send + Sync {
    fn param_dim(&self) -> usize;

    /// Simulate one dataset at `theta` and return its discrepancy to the
    /// observed data.
    fn simulate_discrepancy(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<f64, SimulationError>;
}

/// The prediction function `h(theta)` used for early rejection.
pub trait DiscrepancyBound: Send + Sync {
    fn bound(&self, theta: &ParamVector) -> Result<f64>;
}

/// `h(theta) = c` everywhere. `c = 0` reduces ejMCMC to OejMCMC.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBound(pub f64);

impl DiscrepancyBound for ConstantBound {
    fn bound(&self, _theta: &ParamVector) -> Result<f64> {
        Ok(self.0)
    }
}

impl<F> DiscrepancyBound for F
where
    F: Fn(&ParamVector) -> f64 + Send + Sync,
{
    fn bound(&self, theta: &ParamVector) -> Result<f64> {
        Ok(self(theta))
    }
}
