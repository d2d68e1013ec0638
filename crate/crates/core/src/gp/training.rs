use std::path::Path;

use crate::data::ParamVector;
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_num, read_numeric_csv, theta_header, write_csv};

/// Training pairs `(theta_i, Delta_i)` for the discrepancy surrogate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscrepancySet {
    records: Vec<(ParamVector, f64)>,
}

impl DiscrepancySet {
    pub fn new(records: Vec<(ParamVector, f64)>) -> Result<Self> {
        let mut set = Self::default();
        for (theta, delta) in records {
            set.push(theta, delta)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, theta: ParamVector, delta: f64) -> Result<()> {
        if let Some((first, _)) = self.records.first() {
            theta.check_dim(first.dim())?;
        }
        if !delta.is_finite() || delta < 0.0 {
            return invalid(format!("discrepancy must be finite and nonnegative, got {delta}"));
        }
        self.records.push((theta, delta));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.records.first().map(|(t, _)| t.dim())
    }

    pub fn records(&self) -> &[(ParamVector, f64)] {
        &self.records
    }

    pub fn thetas(&self) -> impl Iterator<Item = &ParamVector> {
        self.records.iter().map(|(t, _)| t)
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|(_, d)| *d)
    }

    pub fn truncate(&mut self, n: usize) {
        self.records.truncate(n);
    }

    /// CSV with header `theta_1..theta_p,delta`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let p = self.dim().unwrap_or(0);
        let header: Vec<String> = theta_header(p).chain(["delta".to_string()]).collect();
        write_csv(
            path,
            &header,
            self.records.iter().map(|(t, d)| {
                t.as_slice()
                    .iter()
                    .chain(std::iter::once(d))
                    .map(|v| fmt_num(*v))
                    .collect()
            }),
        )
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let (header, rows) = read_numeric_csv(path)?;
        if header.len() < 2 || header.last().map(String::as_str) != Some("delta") {
            return Err(Error::Format(
                "training set header must be theta_1..theta_p,delta".into(),
            ));
        }
        let p = header.len() - 1;
        let mut set = Self::default();
        for row in rows {
            set.push(ParamVector::new(row[..p].to_vec())?, row[p])?;
        }
        Ok(set)
    }
}
