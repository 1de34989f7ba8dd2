//! CSV ingestion of raw k-sample and regression data.
//!
//! k-sample files have one observation per row: a group label followed by
//! the p coordinates. Regression files hold one group each: the response
//! followed by the p covariates. A leading header row is detected and
//! skipped when its numeric columns do not parse.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Raw k-sample data; groups are in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct KSampleData {
    pub labels: Vec<String>,
    pub groups: Vec<Vec<DVector<f64>>>,
}

/// Formats with 17 significant digits, which round-trips every `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r)
}

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

/// Line number, leading text fields, numeric fields.
type NumericRow = (u64, Vec<String>, Vec<f64>);

/// Parsed numeric rows with their line numbers, header skipped.
fn numeric_rows<R: Read>(r: R, skip_leading: usize) -> Result<Vec<NumericRow>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, rec) in reader(r).records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(idx as u64 + 1, |p| p.line());
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let fields: Vec<&str> = rec.iter().collect();
        if fields.len() <= skip_leading {
            return Err(parse_err(line, format!("expected more than {skip_leading} column(s)")));
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            fields[skip_leading..].iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                // header row
                width = Some(fields.len());
                continue;
            }
            Err(e) => return Err(parse_err(line, format!("non-numeric value: {e}"))),
        };
        if let Some(w) = width {
            if fields.len() != w {
                return Err(parse_err(line, format!("expected {w} columns, found {}", fields.len())));
            }
        }
        width = Some(fields.len());
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(line, "non-finite value"));
        }
        let lead = fields[..skip_leading].iter().map(|s| s.to_string()).collect();
        rows.push((line, lead, values));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    Ok(rows)
}

pub fn read_ksample_csv<R: Read>(r: R) -> Result<KSampleData> {
    let rows = numeric_rows(r, 1)?;
    let mut labels: Vec<String> = Vec::new();
    let mut groups: Vec<Vec<DVector<f64>>> = Vec::new();
    for (line, lead, values) in rows {
        if values.is_empty() {
            return Err(parse_err(line, "no value columns"));
        }
        let label = &lead[0];
        let idx = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.clone());
                groups.push(Vec::new());
                labels.len() - 1
            }
        };
        groups[idx].push(DVector::from_vec(values));
    }
    Ok(KSampleData { labels, groups })
}

pub fn write_ksample_csv<W: Write>(w: W, data: &KSampleData) -> Result<()> {
    let p = data.groups.iter().flatten().map(|x| x.len()).next().unwrap_or(0);
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["group".to_string()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    wr.write_record(&header).map_err(csv_io)?;
    for (label, group) in data.labels.iter().zip(&data.groups) {
        for obs in group {
            let mut rec = vec![label.clone()];
            rec.extend(obs.iter().map(|&v| format_f64(v)));
            wr.write_record(&rec).map_err(csv_io)?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads one regression group: response column then covariate columns.
pub fn read_regression_csv<R: Read>(r: R) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let rows = numeric_rows(r, 0)?;
    let width = rows[0].2.len();
    if width < 2 {
        return Err(parse_err(rows[0].0, "need a response and at least one covariate"));
    }
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.2[0]));
    let z = DMatrix::from_fn(rows.len(), width - 1, |i, j| rows[i].2[j + 1]);
    Ok((y, z))
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line: 0,
            msg: format!("{other:?}"),
        },
    }
}
