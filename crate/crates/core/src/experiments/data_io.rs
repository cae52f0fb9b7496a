//! CSV ingestion and export of datasets.
//!
//! Files carry a header row. Column roles are assigned by name: one response
//! column, an optional trial-count column and the covariates (every other
//! column unless listed explicitly).

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::dataset::{Dataset, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    /// The first malformed row aborts the load.
    Strict,
    /// Malformed rows are skipped and counted.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub response: String,
    pub covariates: Option<Vec<String>>,
    pub trials: Option<String>,
}

impl CsvSchema {
    pub fn new(response: &str) -> Self {
        Self {
            response: response.into(),
            covariates: None,
            trials: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub rows: usize,
    pub rejected: usize,
}

pub fn load_csv(path: &Path, schema: &CsvSchema, strictness: Strictness) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(BufReader::new(file), schema, strictness)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::SchemaMismatch(format!("column '{name}' not found in header")))
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, strictness: Strictness) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let y_col = column(&headers, &schema.response)?;
    let k_col = schema.trials.as_deref().map(|t| column(&headers, t)).transpose()?;
    let x_names: Vec<String> = match &schema.covariates {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != y_col && Some(*j) != k_col)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    if x_names.is_empty() {
        return Err(Error::SchemaMismatch("no covariate columns".into()));
    }
    let x_cols = x_names.iter().map(|c| column(&headers, c)).collect::<Result<Vec<_>>>()?;

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut k = Vec::new();
    let mut rejected = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let parsed = rec
            .map_err(|e| Error::Parse {
                line: e.position().map_or(idx + 2, |p| p.line() as usize),
                reason: e.to_string(),
            })
            .and_then(|rec| {
                let line = rec.position().map_or(idx + 2, |p| p.line() as usize);
                parse_row(&rec, line, headers.len(), &x_cols, y_col, k_col)
            });
        match parsed {
            Ok((xs, yv, kv)) => {
                x.extend(xs);
                y.push(yv);
                if let Some(kv) = kv {
                    k.push(kv);
                }
            }
            Err(e) if strictness == Strictness::Lenient && matches!(e, Error::Parse { .. }) => rejected += 1,
            Err(e) => return Err(e),
        }
    }
    let rows = y.len();
    let schema = Schema {
        covariates: x_names,
        response: schema.response.clone(),
        trials: schema.trials.clone(),
    };
    let trials = k_col.map(|_| k);
    Ok(LoadReport {
        dataset: Dataset::new(schema, x, y, trials)?,
        rows,
        rejected,
    })
}

type Row = (Vec<f64>, f64, Option<f64>);

fn parse_row(
    rec: &csv::StringRecord,
    line: usize,
    width: usize,
    x_cols: &[usize],
    y_col: usize,
    k_col: Option<usize>,
) -> Result<Row> {
    if rec.len() != width {
        return Err(Error::Parse {
            line,
            reason: format!("expected {width} fields, found {}", rec.len()),
        });
    }
    let field = |j: usize| -> Result<f64> {
        let raw = &rec[j];
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Parse {
                line,
                reason: format!("field {} ('{raw}') is not a finite number", j + 1),
            }),
        }
    };
    let xs = x_cols.iter().map(|&j| field(j)).collect::<Result<Vec<_>>>()?;
    let yv = field(y_col)?;
    let kv = k_col.map(field).transpose()?;
    Ok((xs, yv, kv))
}

/// Writes covariates, response and trial count (if any) with a header row.
/// Values use the shortest representation that reads back exactly.
pub fn write_dataset<W: Write>(data: &Dataset, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let schema = data.schema();
    let mut header: Vec<&str> = schema.covariates.iter().map(|s| s.as_str()).collect();
    header.push(&schema.response);
    if let Some(t) = &schema.trials {
        header.push(t);
    }
    wtr.write_record(&header).map_err(csv_io)?;
    for i in 0..data.len() {
        let z = data.row(i);
        let mut rec: Vec<String> = z.x.iter().map(|v| v.to_string()).collect();
        rec.push(z.y.to_string());
        if let Some(k) = z.trials {
            rec.push(k.to_string());
        }
        wtr.write_record(&rec).map_err(csv_io)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_dataset(data, std::io::BufWriter::new(file))
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
