use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A point in the parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("parameter vector must be non-empty");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return invalid(format!("parameter entry {v} is not finite"));
        }
        Ok(Self(values))
    }

    /// Construction without the finiteness check; used for proposals whose
    /// validity is decided by the prior.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return invalid(format!(
                "parameter dimension {} does not match expected {expected}",
                self.dim()
            ));
        }
        Ok(())
    }

    /// Bitwise identity, used to count unique particles.
    pub(crate) fn bit_key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A `d x T` array of observations, stored row-major (one row per data
/// dimension, one column per time point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    t: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(d: usize, t: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || t == 0 {
            return invalid("dataset dimensions must be positive");
        }
        if values.len() != d * t {
            return invalid(format!(
                "dataset of shape {d}x{t} needs {} values, got {}",
                d * t,
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return invalid("dataset entries must be finite");
        }
        Ok(Self { d, t, values })
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(1, 1, vec![value])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return invalid("dataset rows have unequal lengths");
        }
        Self::new(d, t, rows.concat())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d, self.t)
    }

    pub fn data_dim(&self) -> usize {
        self.d
    }

    pub fn len_time(&self) -> usize {
        self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.t..(i + 1) * self.t]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t + j]
    }
}
