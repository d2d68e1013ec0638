use serde::{Deserialize, Serialize};

use super::{check_theta, finite_dataset, steps_to, Simulator};
use crate::data::{Dataset, ParamVector};
use crate::error::{invalid, Result, SimulationError};
use crate::rng::RngStream;

/// Two-state nonlinear ODE
/// `x1' = 72 / (36 + x2) - theta1`, `x2' = theta2 x1 - 1`,
/// integrated with classical RK4 and observed with Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeSpec {
    pub step: f64,
    pub t_end: f64,
    /// Equally spaced observations on `[0, t_end]`.
    pub n_obs: usize,
    pub x0: [f64; 2],
    pub noise_sd: [f64; 2],
}

impl Default for OdeSpec {
    fn default() -> Self {
        Self {
            step: 0.05,
            t_end: 60.0,
            n_obs: 121,
            x0: [7.0, -10.0],
            noise_sd: [1.0, 3.0],
        }
    }
}

const SINGULAR_TOL: f64 = 1e-6;

impl OdeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.t_end > 0.0) || self.n_obs < 2 {
            return invalid("ode: step and t_end must be positive and n_obs >= 2");
        }
        if self.noise_sd.iter().any(|s| !(*s >= 0.0)) || self.x0.iter().any(|v| !v.is_finite()) {
            return invalid("ode: noise sd must be >= 0 and x0 finite");
        }
        let interval = self.t_end / (self.n_obs - 1) as f64;
        if steps_to(interval, self.step).is_none() {
            return invalid("ode: observation spacing must be a multiple of the step");
        }
        Ok(())
    }

    pub fn obs_times(&self) -> Vec<f64> {
        let dt = self.t_end / (self.n_obs - 1) as f64;
        (0..self.n_obs).map(|i| i as f64 * dt).collect()
    }
}

pub fn ode_rhs(theta: &[f64], x: [f64; 2], t: f64) -> std::result::Result<[f64; 2], SimulationError> {
    let denom = 36.0 + x[1];
    if denom.abs() < SINGULAR_TOL {
        return Err(SimulationError::Singularity {
            t,
            detail: format!("36 + x2 = {denom:e}"),
        });
    }
    Ok([72.0 / denom - theta[0], theta[1] * x[0] - 1.0])
}

/// Noiseless states at the observation times.
pub fn ode_trajectory(
    spec: &OdeSpec,
    theta: &ParamVector,
) -> std::result::Result<Vec<[f64; 2]>, SimulationError> {
    check_theta(theta, 2)?;
    spec.validate()
        .map_err(|e| SimulationError::InvalidInput(e.to_string()))?;
    let th = theta.as_slice();
    let interval = spec.t_end / (spec.n_obs - 1) as f64;
    let per_obs = steps_to(interval, spec.step).unwrap_or(1).max(1);
    let h = interval / per_obs as f64;

    let mut x = spec.x0;
    let mut out = Vec::with_capacity(spec.n_obs);
    out.push(x);
    let mut step = 0usize;
    for _ in 1..spec.n_obs {
        for _ in 0..per_obs {
            let t = step as f64 * h;
            let k1 = ode_rhs(th, x, t)?;
            let k2 = ode_rhs(th, [x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], t + 0.5 * h)?;
            let k3 = ode_rhs(th, [x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], t + 0.5 * h)?;
            let k4 = ode_rhs(th, [x[0] + h * k3[0], x[1] + h * k3[1]], t + h)?;
            for i in 0..2 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            step += 1;
            if !(x[0].is_finite() && x[1].is_finite()) {
                return Err(SimulationError::NonFinite { t: step as f64 * h });
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Noisy `2 x n_obs` observations of the ODE solution.
pub fn simulate_ode(
    theta: &ParamVector,
    spec: &OdeSpec,
    rng: &mut RngStream,
) -> std::result::Result<Dataset, SimulationError> {
    let traj = ode_trajectory(spec, theta)?;
    let n = traj.len();
    let mut values = Vec::with_capacity(2 * n);
    for i in 0..2 {
        for state in &traj {
            values.push(state[i] + spec.noise_sd[i] * rng.standard_normal());
        }
    }
    finite_dataset(2, n, values)
}

impl Simulator for OdeSpec {
    fn param_dim(&self) -> usize {
        2
    }

    fn data_dims(&self) -> (usize, usize) {
        (2, self.n_obs)
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<Dataset, SimulationError> {
        simulate_ode(theta, self, rng)
    }
}
