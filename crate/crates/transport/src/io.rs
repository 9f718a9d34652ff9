//! CSV reading and writing of datasets.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;
use transport_core::{Dataset, Error, Observation};

use crate::error::{AppError, AppResult};

/// Column names of the outcome, indicators and covariates.
///
/// Empty `x` (or `w`) lists select every header named `x1, x2, ...` (or
/// `w1, w2, ...`) in numeric order.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default = "default_y")]
    pub y: String,
    #[serde(default = "default_s")]
    pub s: String,
    #[serde(default = "default_a")]
    pub a: String,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
}

fn default_y() -> String {
    "y".into()
}
fn default_s() -> String {
    "s".into()
}
fn default_a() -> String {
    "a".into()
}

impl Default for Schema {
    fn default() -> Self {
        Schema { y: default_y(), s: default_s(), a: default_a(), x: Vec::new(), w: Vec::new() }
    }
}

fn numbered(headers: &[String], prefix: &str) -> Vec<String> {
    let mut found: Vec<(u32, String)> = headers
        .iter()
        .filter_map(|h| {
            let rest = h.strip_prefix(prefix)?;
            let k: u32 = rest.parse().ok()?;
            (rest == k.to_string()).then(|| (k, h.clone()))
        })
        .collect();
    found.sort();
    found.into_iter().map(|(_, h)| h).collect()
}

impl Schema {
    /// Fills empty covariate lists from the header.
    pub fn resolve(&self, headers: &[String]) -> Schema {
        let mut s = self.clone();
        if s.x.is_empty() {
            s.x = numbered(headers, "x");
        }
        if s.w.is_empty() {
            s.w = numbered(headers, "w");
        }
        s
    }
}

fn schema_error(message: String) -> AppError {
    Error::Schema(message).into()
}

fn parse_error(message: String) -> AppError {
    Error::Parse(message).into()
}

fn parse_number(cell: &str, line: usize, column: &str) -> AppResult<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return Err(parse_error(format!("line {line}: column {column} is blank")));
    }
    let v: f64 = t.parse().map_err(|_| parse_error(format!("line {line}: column {column} is not a number: {t:?}")))?;
    if !v.is_finite() {
        return Err(parse_error(format!("line {line}: column {column} is not finite")));
    }
    Ok(v)
}

fn parse_binary(cell: &str, line: usize, column: &str) -> AppResult<bool> {
    match parse_number(cell, line, column)? {
        v if v == 0.0 => Ok(false),
        v if v == 1.0 => Ok(true),
        v => Err(parse_error(format!("line {line}: column {column} must be 0 or 1, found {v}"))),
    }
}

/// Reads a dataset from CSV text. Rows keep file order; `w` cells may be
/// blank on trial rows.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> AppResult<Dataset> {
    read_csv_resolved(reader, schema).map(|(d, _)| d)
}

/// Like [`read_csv`], also returning the schema with covariate lists filled
/// in from the header.
pub fn read_csv_resolved<R: Read>(reader: R, schema: &Schema) -> AppResult<(Dataset, Schema)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_error(format!("header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let schema = schema.resolve(&headers);
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let column = |name: &str| -> AppResult<usize> {
        index.get(name).copied().ok_or_else(|| schema_error(format!("column {name:?} not found in header")))
    };
    let (iy, is, ia) = (column(&schema.y)?, column(&schema.s)?, column(&schema.a)?);
    let ix = schema.x.iter().map(|c| column(c)).collect::<AppResult<Vec<_>>>()?;
    let iw = schema.w.iter().map(|c| column(c)).collect::<AppResult<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| parse_error(format!("line {line}: {e}")))?;
        let cell = |i: usize| record.get(i).unwrap_or("");
        let y = parse_number(cell(iy), line, &schema.y)?;
        let s = parse_binary(cell(is), line, &schema.s)?;
        let a = parse_binary(cell(ia), line, &schema.a)?;
        let x = ix
            .iter()
            .zip(&schema.x)
            .map(|(&i, name)| parse_number(cell(i), line, name))
            .collect::<AppResult<Vec<_>>>()?;
        let mut obs = Observation::new(y, s, a, x);
        let blank = iw.iter().all(|&i| cell(i).is_empty());
        if !iw.is_empty() && !s && !blank {
            let w = iw
                .iter()
                .zip(&schema.w)
                .map(|(&i, name)| parse_number(cell(i), line, name))
                .collect::<AppResult<Vec<_>>>()?;
            obs = obs.with_w(w);
        }
        rows.push(obs);
    }
    Ok((Dataset::new(rows)?, schema))
}

pub fn load_csv(path: &Path, schema: &Schema) -> AppResult<Dataset> {
    load_csv_resolved(path, schema).map(|(d, _)| d)
}

pub fn load_csv_resolved(path: &Path, schema: &Schema) -> AppResult<(Dataset, Schema)> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    read_csv_resolved(std::io::BufReader::new(file), schema).map_err(|e| e.context(path.display()))
}

/// Writes `data` with columns `y, s, a, x1.., w1..`; `w` is blank on trial rows.
/// Values use the shortest representation that round-trips exactly.
pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> AppResult<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string(), "s".into(), "a".into()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    header.extend((1..=data.q()).map(|j| format!("w{j}")));
    let err = |e: csv::Error| AppError::new("IO", "data", transport_core::error::ErrorClass::Data, e.to_string());
    wtr.write_record(&header).map_err(err)?;
    for r in data.rows() {
        let mut rec = vec![r.y.to_string(), (r.s as u8).to_string(), (r.a as u8).to_string()];
        rec.extend(r.x.iter().map(f64::to_string));
        match &r.w {
            Some(w) => rec.extend(w.iter().map(f64::to_string)),
            None => rec.extend((0..data.q()).map(|_| String::new())),
        }
        wtr.write_record(&rec).map_err(err)?;
    }
    wtr.flush().map_err(|e| AppError::new("IO", "data", transport_core::error::ErrorClass::Data, e.to_string()))?;
    Ok(())
}
