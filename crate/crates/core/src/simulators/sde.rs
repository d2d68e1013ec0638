use serde::{Deserialize, Serialize};

use super::{check_theta, finite_dataset, steps_to, Simulator};
use crate::data::{Dataset, ParamVector};
use crate::error::{invalid, Result, SimulationError};
use crate::rng::RngStream;

/// Net change of (RNA, P, P2, DNA) per firing of each of the eight
/// reactions of the prokaryotic auto-regulatory network.
pub const STOICHIOMETRY: [[f64; 8]; 4] = [
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, -2.0, 2.0, 0.0, -1.0],
    [-1.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0],
    [-1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
];

const RNA: usize = 0;
const P: usize = 1;
const P2: usize = 2;
const DNA: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdeScenario {
    /// All four species observed without measurement error.
    D1,
    /// All four observed with `N(0, noise_var)` measurement error.
    D2,
    /// DNA unobserved; the noise standard deviation is the ninth parameter.
    D3,
}

impl SdeScenario {
    pub fn infers_sigma(self) -> bool {
        matches!(self, Self::D3)
    }

    pub fn observed_rows(self) -> &'static [usize] {
        match self {
            Self::D1 | Self::D2 => &[RNA, P, P2, DNA],
            Self::D3 => &[RNA, P, P2],
        }
    }
}

/// Chemical Langevin approximation of the network, integrated with
/// Euler–Maruyama.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdeSpec {
    pub scenario: SdeScenario,
    /// Total DNA copies: bound (DNA.P2) plus free DNA.
    pub k: f64,
    /// Initial (RNA, P, P2, DNA).
    pub x0: [f64; 4],
    pub dt: f64,
    pub obs_times: Vec<f64>,
    /// Measurement-noise variance for D2.
    pub noise_var: f64,
    /// Disable to integrate the drift only.
    pub diffusion: bool,
}

impl Default for SdeSpec {
    fn default() -> Self {
        Self {
            scenario: SdeScenario::D1,
            k: 10.0,
            x0: [8.0, 8.0, 8.0, 5.0],
            dt: 0.05,
            obs_times: (0..50).map(f64::from).collect(),
            noise_var: 5.0,
            diffusion: true,
        }
    }
}

impl SdeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.k > 0.0 && self.noise_var >= 0.0) {
            return invalid("sde: dt and k must be positive, noise variance >= 0");
        }
        if self.x0.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || self.x0[DNA] > self.k {
            return invalid("sde: initial state must be >= 0 with DNA <= k");
        }
        if self.obs_times.is_empty()
            || self.obs_times[0] < 0.0
            || self.obs_times.windows(2).any(|w| w[1] <= w[0])
        {
            return invalid("sde: observation times must be >= 0 and strictly increasing");
        }
        if self.obs_times.iter().any(|&t| steps_to(t, self.dt).is_none()) {
            return invalid("sde: observation times must be multiples of dt");
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        if self.scenario.infers_sigma() {
            9
        } else {
            8
        }
    }

    pub fn default_truth(&self) -> Vec<f64> {
        let mut t = vec![0.1, 0.7, 0.35, 0.2, 0.1, 0.9, 0.3, 0.1];
        if self.scenario.infers_sigma() {
            t.push(1.0);
        }
        t
    }
}

/// Reaction propensities, clamped at zero.
pub fn sde_propensities(x: &[f64; 4], theta: &[f64], k: f64) -> [f64; 8] {
    let h = [
        theta[0] * x[DNA] * x[P2],
        theta[1] * (k - x[DNA]),
        theta[2] * x[DNA],
        theta[3] * x[RNA],
        theta[4] * x[P] * (x[P] - 1.0) / 2.0,
        theta[5] * x[P2],
        theta[6] * x[RNA],
        theta[7] * x[P],
    ];
    h.map(|v| v.max(0.0))
}

/// One Euler–Maruyama step `x += S h dt + S sqrt(diag h) dW`, followed by
/// clamping to `0 <= x` and `DNA <= k`. `dw = None` drops the diffusion.
pub fn sde_euler_step(x: &mut [f64; 4], theta: &[f64], k: f64, dt: f64, dw: Option<&[f64; 8]>) {
    let h = sde_propensities(x, theta, k);
    let mut incr = [0.0; 8];
    for j in 0..8 {
        incr[j] = h[j] * dt;
        if let Some(dw) = dw {
            incr[j] += h[j].sqrt() * dw[j];
        }
    }
    for (i, row) in STOICHIOMETRY.iter().enumerate() {
        x[i] += row.iter().zip(&incr).map(|(s, v)| s * v).sum::<f64>();
        x[i] = x[i].max(0.0);
    }
    x[DNA] = x[DNA].min(k);
}

pub fn simulate_sde(
    theta: &ParamVector,
    spec: &SdeSpec,
    rng: &mut RngStream,
) -> std::result::Result<Dataset, SimulationError> {
    check_theta(theta, spec.param_count())?;
    let th = theta.as_slice();
    if th.iter().any(|v| *v < 0.0) {
        return Err(SimulationError::InvalidInput(
            "rate constants must be nonnegative".into(),
        ));
    }
    let sqrt_dt = spec.dt.sqrt();
    let mut x = spec.x0;
    let mut step = 0usize;
    let mut states = Vec::with_capacity(spec.obs_times.len());
    for &t_obs in &spec.obs_times {
        let target = steps_to(t_obs, spec.dt)
            .ok_or_else(|| SimulationError::InvalidInput(format!("time {t_obs} is off the grid")))?;
        while step < target {
            if spec.diffusion {
                let dw: [f64; 8] = std::array::from_fn(|_| sqrt_dt * rng.standard_normal());
                sde_euler_step(&mut x, th, spec.k, spec.dt, Some(&dw));
            } else {
                sde_euler_step(&mut x, th, spec.k, spec.dt, None);
            }
            step += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(SimulationError::NonFinite {
                    t: step as f64 * spec.dt,
                });
            }
        }
        states.push(x);
    }

    let noise_sd = match spec.scenario {
        SdeScenario::D1 => 0.0,
        SdeScenario::D2 => spec.noise_var.sqrt(),
        SdeScenario::D3 => th[8],
    };
    let rows = spec.scenario.observed_rows();
    let mut values = Vec::with_capacity(rows.len() * states.len());
    for &r in rows {
        for s in &states {
            let noise = if noise_sd > 0.0 {
                noise_sd * rng.standard_normal()
            } else {
                0.0
            };
            values.push(s[r] + noise);
        }
    }
    finite_dataset(rows.len(), states.len(), values)
}

impl Simulator for SdeSpec {
    fn param_dim(&self) -> usize {
        self.param_count()
    }

    fn data_dims(&self) -> (usize, usize) {
        (self.scenario.observed_rows().len(), self.obs_times.len())
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        rng: &mut RngStream,
    ) -> std::result::Result<Dataset, SimulationError> {
        simulate_sde(theta, self, rng)
    }
}
