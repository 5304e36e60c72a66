//! CSV ingestion and emission of curve samples and responses.
//!
//! Curves: a header `t,<grid points>` followed by rows `id,<values>`.
//! Responses: rows `id,y`, with an optional `id,y` header.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::funcspace::{FunctionalSample, Grid};

/// Affine map from the declared grid onto [0, 1]: t' = (t − offset)/scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridMap {
    pub offset: f64,
    pub scale: f64,
}

impl GridMap {
    pub fn to_unit(&self, t: f64) -> f64 {
        (t - self.offset) / self.scale
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.offset + self.scale * u
    }
}

#[derive(Debug, Clone)]
pub struct CurveTable {
    pub ids: Vec<String>,
    /// Grid points as declared in the file.
    pub declared: Vec<f64>,
    pub map: GridMap,
    pub sample: FunctionalSample,
}

fn parse_number(cell: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: `{}` is not a number", cell.trim())))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{what}: non-finite value `{}`", cell.trim())));
    }
    Ok(v)
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn record_line(rec: &csv::StringRecord, fallback: u64) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(fallback)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(line, e.to_string())
}

pub fn parse_curves(text: &str) -> Result<CurveTable> {
    let mut rdr = reader(text);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::parse(1, "empty input")),
    };
    let hline = record_line(&header, 1);
    if header.get(0).map(str::trim) != Some("t") {
        return Err(Error::parse(hline, "header must start with `t`"));
    }
    let declared: Vec<f64> = header
        .iter()
        .skip(1)
        .enumerate()
        .map(|(j, c)| parse_number(c, hline, &format!("grid column {}", j + 1)))
        .collect::<Result<_>>()?;
    let p = declared.len();
    if p < crate::funcspace::MIN_GRID_POINTS {
        return Err(Error::parse(
            hline,
            format!("need at least {} grid points, got {p}", crate::funcspace::MIN_GRID_POINTS),
        ));
    }
    if let Some(j) = declared.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::parse(hline, format!("grid not increasing at column {}", j + 3)));
    }
    let map = GridMap {
        offset: declared[0],
        scale: declared[p - 1] - declared[0],
    };
    if !(map.scale.is_finite() && map.scale > 0.0) {
        return Err(Error::parse(hline, "grid span is not finite"));
    }
    let mut unit: Vec<f64> = declared.iter().map(|&t| map.to_unit(t)).collect();
    unit[0] = 0.0;
    unit[p - 1] = 1.0;
    if unit.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::parse(hline, "grid points collapse after rescaling to [0, 1]"));
    }
    let grid = Grid::new(unit).map_err(|e| Error::parse(hline, e.to_string()))?;
    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (k, rec) in records.enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = record_line(&rec, k as u64 + 2);
        if rec.len() == 1 && rec.get(0).map(str::is_empty).unwrap_or(true) {
            continue;
        }
        if rec.len() != p + 1 {
            return Err(Error::parse(line, format!("expected {} cells, got {}", p + 1, rec.len())));
        }
        let id = rec.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(line, format!("duplicate id `{id}`")));
        }
        let vals = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, c)| parse_number(c, line, &format!("column {}", j + 2)))
            .collect::<Result<Vec<f64>>>()?;
        ids.push(id);
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::parse(hline, "no curves"));
    }
    let sample = FunctionalSample::new(grid, rows)?;
    Ok(CurveTable {
        ids,
        declared,
        map,
        sample,
    })
}

/// Pairs `id,y`; a first row whose second cell is not numeric is taken as
/// a header.
pub fn parse_responses(text: &str) -> Result<Vec<(String, f64)>> {
    let mut rdr = reader(text);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut first = true;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = record_line(&rec, k as u64 + 1);
        if rec.len() == 1 && rec.get(0).map(str::is_empty).unwrap_or(true) {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::parse(line, format!("expected 2 cells, got {}", rec.len())));
        }
        let id = rec.get(0).unwrap_or_default();
        let cell = rec.get(1).unwrap_or_default();
        if std::mem::take(&mut first) && cell.parse::<f64>().is_err() {
            continue;
        }
        if id.is_empty() {
            return Err(Error::parse(line, "empty id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(line, format!("duplicate id `{id}`")));
        }
        out.push((id.to_string(), parse_number(cell, line, "response")?));
    }
    if out.is_empty() {
        return Err(Error::parse(1, "no responses"));
    }
    Ok(out)
}

/// Orders responses like the curves; every curve needs exactly one response.
pub fn align_responses(ids: &[String], responses: &[(String, f64)]) -> Result<Vec<f64>> {
    let map: HashMap<&str, f64> = responses.iter().map(|(i, y)| (i.as_str(), *y)).collect();
    if map.len() != ids.len() {
        return Err(Error::invalid(format!("{} curves but {} responses", ids.len(), map.len())));
    }
    ids.iter()
        .map(|id| {
            map.get(id.as_str())
                .copied()
                .ok_or_else(|| Error::invalid(format!("no response for curve `{id}`")))
        })
        .collect()
}

/// 17 significant digits, enough to read back the same f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in rows {
        w.write_record(&r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
}

pub fn write_curves(ids: &[String], declared: &[f64], sample: &FunctionalSample) -> String {
    let header = std::iter::once("t".to_string()).chain(declared.iter().map(|t| fmt_f64(*t)));
    let body = ids.iter().zip(sample.rows()).map(|(id, row)| {
        std::iter::once(id.clone())
            .chain(row.iter().map(|v| fmt_f64(*v)))
            .collect::<Vec<_>>()
    });
    write_rows(std::iter::once(header.collect()).chain(body))
}

pub fn write_responses(ids: &[String], y: &[f64]) -> String {
    let body = ids.iter().zip(y).map(|(id, v)| vec![id.clone(), fmt_f64(*v)]);
    write_rows(std::iter::once(vec!["id".to_string(), "y".to_string()]).chain(body))
}
