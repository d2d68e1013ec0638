//! Trace CSV `iteration,outcome,theta_1..theta_p,h,delta,sim` and sample
//! CSV `theta_1..theta_p`. Absent `h`/`delta` are empty fields.

use std::path::Path;

use super::{IterationRecord, Outcome};
use crate::data::ParamVector;
use crate::error::{Error, Result};
use crate::io::{fmt_num, parse_num, read_csv, read_numeric_csv, theta_header, write_csv};

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn write_trace_csv<P: AsRef<Path>>(path: P, trace: &[IterationRecord]) -> Result<()> {
    let p = trace.first().map_or(1, |r| r.theta.dim());
    let header: Vec<String> = ["iteration", "outcome"]
        .into_iter()
        .map(String::from)
        .chain(theta_header(p))
        .chain(["h", "delta", "sim"].into_iter().map(String::from))
        .collect();
    let rows = trace.iter().map(|r| {
        let mut row = vec![r.iteration.to_string(), r.outcome.name().to_string()];
        row.extend(r.theta.as_slice().iter().map(|v| fmt_num(*v)));
        row.push(opt_num(r.h));
        row.push(opt_num(r.delta));
        row.push(u8::from(r.sim).to_string());
        row
    });
    write_csv(path, &header, rows)
}

pub fn read_trace_csv<P: AsRef<Path>>(path: P) -> Result<Vec<IterationRecord>> {
    let (header, rows) = read_csv(path)?;
    let n = header.len();
    if n < 6 || header[0] != "iteration" || header[1] != "outcome" || header[n - 1] != "sim" {
        return Err(Error::Format(format!("not a trace file: {}", header.join(","))));
    }
    let p = n - 5;
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            let bad = |what: &str| Error::Format(format!("row {}: bad {what}", i + 2));
            let iteration = row[0].parse::<usize>().map_err(|_| bad("iteration"))?;
            let outcome = Outcome::parse(&row[1]).ok_or_else(|| bad("outcome"))?;
            let theta = row[2..2 + p]
                .iter()
                .map(|s| parse_num(s))
                .collect::<Result<Vec<f64>>>()?;
            let opt = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse_num(s).map(Some)
                }
            };
            let h = opt(&row[2 + p])?;
            let delta = opt(&row[3 + p])?;
            let sim = match row[4 + p].as_str() {
                "1" => true,
                "0" => false,
                _ => return Err(bad("sim flag")),
            };
            Ok(IterationRecord {
                iteration,
                outcome,
                theta: ParamVector::new(theta)?,
                h,
                delta,
                sim,
                failed: delta == Some(f64::INFINITY),
            })
        })
        .collect()
}

pub fn write_samples_csv<P: AsRef<Path>>(path: P, samples: &[ParamVector]) -> Result<()> {
    let p = samples.first().map_or(1, ParamVector::dim);
    let header: Vec<String> = theta_header(p).collect();
    write_csv(
        path,
        &header,
        samples
            .iter()
            .map(|s| s.as_slice().iter().map(|v| fmt_num(*v)).collect()),
    )
}

pub fn read_samples_csv<P: AsRef<Path>>(path: P) -> Result<Vec<ParamVector>> {
    let (header, rows) = read_numeric_csv(path)?;
    if header.is_empty() || !header.iter().all(|h| h.starts_with("theta_")) {
        return Err(Error::Format(format!("not a sample file: {}", header.join(","))));
    }
    rows.into_iter().map(ParamVector::new).collect()
}
