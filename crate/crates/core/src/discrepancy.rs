//! Discrepancies between simulated and observed datasets.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Result};

pub trait Discrepancy: Send + Sync {
    fn distance(&self, simulated: &Dataset, observed: &Dataset) -> Result<f64>;
}

/// Root mean squared difference over all `d * T` entries.
pub fn rmse_discrepancy(x: &Dataset, y: &Dataset) -> Result<f64> {
    if x.dims() != y.dims() {
        return invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            x.dims(),
            y.dims()
        ));
    }
    let n = x.values().len() as f64;
    let ss: f64 = x
        .values()
        .iter()
        .zip(y.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n).sqrt())
}

/// `|x - y|` for scalar data.
pub fn abs_discrepancy(x: &Dataset, y: &Dataset) -> Result<f64> {
    if x.dims() != (1, 1) || y.dims() != (1, 1) {
        return invalid("absolute discrepancy needs 1x1 datasets");
    }
    Ok((x.values()[0] - y.values()[0]).abs())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Rmse;

impl Discrepancy for Rmse {
    fn distance(&self, simulated: &Dataset, observed: &Dataset) -> Result<f64> {
        rmse_discrepancy(simulated, observed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AbsDiff;

impl Discrepancy for AbsDiff {
    fn distance(&self, simulated: &Dataset, observed: &Dataset) -> Result<f64> {
        abs_discrepancy(simulated, observed)
    }
}

/// RMSE after mapping every row to `[0, 1]` with the row's min/max taken
/// from a reference (observed) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxRmse {
    lo: Vec<f64>,
    scale: Vec<f64>,
}

impl MinMaxRmse {
    pub fn from_reference(reference: &Dataset) -> Self {
        let (d, _) = reference.dims();
        let mut lo = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        for i in 0..d {
            let row = reference.row(i);
            let min = row.iter().copied().fold(f64::INFINITY, f64::min);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            lo.push(min);
            // a constant row is left unscaled
            scale.push(if max > min { max - min } else { 1.0 });
        }
        Self { lo, scale }
    }

    fn normalize(&self, ds: &Dataset) -> Result<Dataset> {
        let (d, t) = ds.dims();
        if d != self.lo.len() {
            return invalid("dataset dimension does not match normalization");
        }
        let mut out = Vec::with_capacity(d * t);
        for i in 0..d {
            out.extend(ds.row(i).iter().map(|v| (v - self.lo[i]) / self.scale[i]));
        }
        Dataset::new(d, t, out)
    }
}

impl Discrepancy for MinMaxRmse {
    fn distance(&self, simulated: &Dataset, observed: &Dataset) -> Result<f64> {
        rmse_discrepancy(&self.normalize(simulated)?, &self.normalize(observed)?)
    }
}

/// `rho(S(x), S(y))` for a user-supplied summary map `S`.
pub struct Summarized<S, D> {
    summary: S,
    inner: D,
}

impl<S, D> Summarized<S, D>
where
    S: Fn(&Dataset) -> Result<Dataset> + Send + Sync,
    D: Discrepancy,
{
    pub fn new(summary: S, inner: D) -> Self {
        Self { summary, inner }
    }
}

impl<S, D> Discrepancy for Summarized<S, D>
where
    S: Fn(&Dataset) -> Result<Dataset> + Send + Sync,
    D: Discrepancy,
{
    fn distance(&self, simulated: &Dataset, observed: &Dataset) -> Result<f64> {
        self.inner
            .distance(&(self.summary)(simulated)?, &(self.summary)(observed)?)
    }
}
