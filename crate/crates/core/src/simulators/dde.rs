use serde::{Deserialize, Serialize};

use super::{check_theta, finite_dataset, steps_to, Simulator};
use crate::data::{Dataset, ParamVector};
use crate::error::{invalid, Result, SimulationError};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdeNoise {
    /// `ln y ~ N(ln x, sigma^2)`.
    LogNormal,
    /// Lognormal with natural-scale mean `x` and variance `sigma^2`.
    MomentMatched,
}

/// Nicholson blowfly model `x' = nu x(t) (1 - x(t - tau) / (1000 P))` with
/// constant history `x(t) = X0` for `t <= 0`. Parameters are
/// `(X0, nu, P, tau)` plus `sigma` when `infer_sigma` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdeSpec {
    pub step: f64,
    pub obs_times: Vec<f64>,
    /// Observation noise when it is not inferred.
    pub sigma: f64,
    pub infer_sigma: bool,
    pub noise: DdeNoise,
}

impl Default for DdeSpec {
    fn default() -> Self {
        Self {
            step: 0.1,
            obs_times: (0..137).map(|i| 2.0 * f64::from(i)).collect(),
            sigma: 0.1,
            infer_sigma: false,
            noise: DdeNoise::LogNormal,
        }
    }
}

impl DdeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.sigma >= 0.0) {
            return invalid("dde: step must be positive and sigma >= 0");
        }
        if self.obs_times.is_empty()
            || self.obs_times[0] < 0.0
            || self.obs_times.windows(2).any(|w| w[1] <= w[0])
        {
            return invalid("dde: observation times must be >= 0 and strictly increasing");
        }
        if self.obs_times.iter().any(|&t| steps_to(t, self.step).is_none()) {
            return invalid("dde: observation times must be multiples of the step");
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        if self.infer_sigma {
            5
        } else {
            4
        }
    }

    /// Prior medians of `(X0, nu, P, tau)`.
    pub fn default_truth(&self) -> Vec<f64> {
        let mut t = vec![8.5f64.exp(), (-1.35f64).exp(), 0.8f64.exp(), 2.25f64.exp()];
        if self.infer_sigma {
            t.push(self.sigma);
        }
        t
    }
}

/// Euler solution on the grid `0, step, 2 step, ..., t_end`.
pub fn dde_trajectory(
    x0: f64,
    nu: f64,
    p: f64,
    tau: f64,
    step: f64,
    t_end: f64,
) -> std::result::Result<Vec<f64>, SimulationError> {
    if !(x0 > 0.0 && nu > 0.0 && p > 0.0 && tau > 0.0 && step > 0.0) {
        return Err(SimulationError::InvalidInput(format!(
            "need X0, nu, P, tau > 0, got ({x0}, {nu}, {p}, {tau})"
        )));
    }
    let n = (t_end / step).round() as usize;
    let lag = tau / step;
    let cap = 1000.0 * p;
    let mut xs = Vec::with_capacity(n + 1);
    xs.push(x0);
    for i in 0..n {
        let pos = i as f64 - lag;
        let delayed = if pos <= 0.0 {
            x0
        } else {
            let snapped = pos.round();
            if (pos - snapped).abs() < 1e-9 {
                xs[snapped as usize]
            } else {
                let j = pos.floor() as usize;
                let f = pos - j as f64;
                xs[j] + f * (xs[j + 1] - xs[j])
            }
        };
        let x = xs[i];
        let next = x + step * nu * x * (1.0 - delayed / cap);
        let t = (i + 1) as f64 * step;
        if !next.is_finite() {
            return Err(SimulationError::NonFinite { t });
        }
        if next <= 0.0 {
            return Err(SimulationError::NonPositive { t });
        }
        xs.push(next);
    }
    Ok(xs)
}

pub fn simulate_dde(
    theta: &ParamVector,
    spec: &DdeSpec,
    rng: &mut RngStream,
) -> std::result::Result<Dataset, SimulationError> {
    check_theta(theta, spec.param_count())?;
    let th = theta.as_slice();
    let sigma = if spec.infer_sigma { th[4] } else { spec.sigma };
    if !(sigma >= 0.0) {
        return Err(SimulationError::InvalidInput(format!("sigma must be >= 0, got {sigma}")));
    }
    let idx: Vec<usize> = spec
        .obs_times
        .iter()
        .map(|&t| {
            steps_to(t, spec.step)
                .ok_or_else(|| SimulationError::InvalidInput(format!("time {t} is off the grid")))
        })
        .collect::<std::result::Result<_, _>>()?;
    let t_end = spec.obs_times.last().copied().unwrap_or(0.0);
    let xs = dde_trajectory(th[0], th[1], th[2], th[3], spec.step, t_end)?;
    let values = idx
        .iter()
        .map(|&i| {
            let x = xs[i];
            if sigma == 0.0 {
                return x;
            }
            let z = rng.standard_normal();
            match spec.noise {
                DdeNoise::LogNormal => (x.ln() + sigma * z).exp(),
                DdeNoise::MomentMatched => {
                    let s2 = (1.0 + sigma * sigma / (x * x)).ln();
                    (x.ln() - 0.5 * s2 + s2.sqrt() * z).exp()
                }
            }
        })
        .collect();
    finite_dataset(1, idx.len(), values)
}

impl Simulator for DdeSpec {
    fn param_dim(&self) -> usize {
        self.param_count()
    }

    fn data_dims(&self) -> (usize, usize) {
        (1, self.obs_times.len())
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<Dataset, SimulationError> {
        simulate_dde(theta, self, rng)
    }
}
