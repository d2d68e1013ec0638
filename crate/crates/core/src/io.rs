//! CSV helpers shared by every artifact writer. Numbers are printed with 17
//! significant digits so that every value round-trips exactly.

use std::path::Path;

use crate::error::{Error, Result};

pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub fn parse_num(s: &str) -> Result<f64> {
    let t = s.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::Format(format!("not a number: {t:?}"))),
    }
}

pub fn write_csv<P, I>(path: P, header: &[String], rows: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV with a header row. Returns the header and the raw string
/// records; record lengths are checked against the header.
pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(csv_err)?;
    let header = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Numeric CSV: every field must parse as a number.
pub fn read_numeric_csv<P: AsRef<Path>>(path: P) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (header, rows) = read_csv(path)?;
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|s| parse_num(s))
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Format(format!("row {}: {e}", i + 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((header, rows))
}

pub(crate) fn theta_header(p: usize) -> impl Iterator<Item = String> {
    (1..=p).map(|i| format!("theta_{i}"))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::INFINITY] {
            assert_eq!(parse_num(&fmt_num(v)).unwrap(), v);
        }
        assert!(parse_num("abc").is_err());
    }
}
