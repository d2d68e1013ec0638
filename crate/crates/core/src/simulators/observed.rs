//! Observed-data files: CSV with header `time,value_1..value_d`, one row
//! per observation time.

use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::{fmt_num, read_numeric_csv, write_csv};

pub const BLOWFLY_OBSERVATIONS: usize = 137;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub times: Vec<f64>,
    pub data: Dataset,
}

pub fn read_observed_csv<P: AsRef<Path>>(path: P) -> Result<ObservedData> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.len() < 2 || header[0] != "time" {
        return Err(Error::Format(format!(
            "expected header time,value_1..value_d, got {}",
            header.join(",")
        )));
    }
    if rows.is_empty() {
        return Err(Error::Format("no observations".into()));
    }
    let d = header.len() - 1;
    let t = rows.len();
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Format("observation times must be strictly increasing".into()));
    }
    let mut values = Vec::with_capacity(d * t);
    for j in 0..d {
        values.extend(rows.iter().map(|r| r[j + 1]));
    }
    let data = Dataset::new(d, t, values).map_err(|e| Error::Format(e.to_string()))?;
    Ok(ObservedData { times, data })
}

pub fn write_observed_csv<P: AsRef<Path>>(path: P, obs: &ObservedData) -> Result<()> {
    let (d, t) = obs.data.dims();
    if obs.times.len() != t {
        return Err(Error::InvalidArgument("times and data lengths differ".into()));
    }
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain((1..=d).map(|i| format!("value_{i}")))
        .collect();
    let rows = (0..t).map(|j| {
        std::iter::once(fmt_num(obs.times[j]))
            .chain((0..d).map(|i| fmt_num(obs.data.get(i, j))))
            .collect::<Vec<_>>()
    });
    write_csv(path, &header, rows)
}

/// Blowfly counts: a `time,count` CSV with exactly 137 nonnegative rows.
pub fn load_blowfly_data<P: AsRef<Path>>(path: P) -> Result<ObservedData> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.len() != 2 {
        return Err(Error::Format(format!(
            "expected two columns time,count, got {}",
            header.join(",")
        )));
    }
    if rows.len() != BLOWFLY_OBSERVATIONS {
        return Err(Error::Format(format!(
            "expected {BLOWFLY_OBSERVATIONS} observations, got {}",
            rows.len()
        )));
    }
    if let Some(i) = rows.iter().position(|r| !(r[1] >= 0.0) || !r[1].is_finite()) {
        return Err(Error::Format(format!(
            "row {}: count must be a nonnegative number, got {}",
            i + 2,
            rows[i][1]
        )));
    }
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Format("observation times must be strictly increasing".into()));
    }
    let data = Dataset::new(1, rows.len(), rows.iter().map(|r| r[1]).collect())?;
    Ok(ObservedData { times, data })
}
