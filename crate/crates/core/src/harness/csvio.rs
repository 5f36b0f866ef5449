//! Plain CSV files for the command-line tools: header row, empty field = NA.
//! Indicator columns are named `R_<column>` and hold 1 for observed cells.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::impute::ImputedDataset;
use crate::simgen::{Domain, MaskedDataset};

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn parse(raw: &str, col: &str, row: usize) -> Result<Option<f64>> {
    let v = raw.trim();
    if v.is_empty() || v == "NA" {
        return Ok(None);
    }
    v.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Schema(format!("column `{col}` row {row}: `{v}` is not a number")))
}

/// Masked covariates, their indicators and (if present) the outcome.
pub fn write_masked_csv(path: &Path, ds: &MaskedDataset, outcome_name: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ds.names().to_vec();
    header.extend(ds.maskable().iter().map(|&j| format!("R_{}", ds.names()[j])));
    if ds.outcome().is_some() {
        header.push(outcome_name.to_string());
    }
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = (0..ds.p()).map(|j| ds.get(i, j).map_or_else(String::new, fmt)).collect();
        rec.extend(ds.maskable().iter().map(|&j| (ds.is_observed(i, j) as u8).to_string()));
        if let Some(y) = ds.outcome() {
            rec.push(fmt(y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Completed covariates, indicators and an optional outcome column.
pub fn write_imputed_csv(path: &Path, ds: &ImputedDataset, outcome: Option<(&str, &[f64])>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = ds.feature_names();
    if let Some((name, _)) = outcome {
        header.push(name.to_string());
    }
    w.write_record(&header)?;
    let f = ds.features();
    for i in 0..ds.n() {
        let mut rec: Vec<String> = (0..f.ncols()).map(|c| fmt(f[(i, c)])).collect();
        if let Some((_, y)) = outcome {
            rec.push(fmt(y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Numeric columns by name, with NA as `None`.
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<Option<f64>>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut columns = vec![Vec::new(); header.len()];
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Schema(format!("row {row} has {} fields, expected {}", rec.len(), header.len())));
            }
            for (c, raw) in rec.iter().enumerate() {
                columns[c].push(parse(raw, &header[c], row)?);
            }
        }
        Ok(CsvTable { header, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.header.iter().position(|h| h == name).map(|k| self.columns[k].as_slice())
    }

    pub fn complete_column(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`")))?;
        col.iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::Invalid(format!("column `{name}` is missing in row {i}"))))
            .collect()
    }

    fn n(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    /// Covariate columns: everything except `R_*` indicators and the excluded names.
    fn covariates(&self, exclude: &[&str]) -> Vec<usize> {
        (0..self.header.len())
            .filter(|&k| !self.header[k].starts_with("R_") && !exclude.contains(&self.header[k].as_str()))
            .collect()
    }
}

/// Read a masked dataset; NA cells define the mask.
pub fn read_masked_csv(path: &Path, outcome: Option<&str>, domain: Domain) -> Result<MaskedDataset> {
    let t = CsvTable::read(path)?;
    let exclude: Vec<&str> = outcome.into_iter().chain(["domain"]).collect();
    let cols = t.covariates(&exclude);
    let y = match outcome {
        Some(name) if t.column(name).is_some() => Some(t.complete_column(name)?),
        _ => None,
    };
    let names: Vec<String> = cols.iter().map(|&k| t.header[k].clone()).collect();
    let rows: Vec<Vec<Option<f64>>> = (0..t.n()).map(|i| cols.iter().map(|&k| t.columns[k][i]).collect()).collect();
    let extra: Vec<usize> = (0..names.len())
        .filter(|&j| t.column(&format!("R_{}", names[j])).is_some())
        .collect();
    MaskedDataset::from_cells(names, &rows, &extra, y, domain)
}

/// Read a completed dataset written by [`write_imputed_csv`].
pub fn read_imputed_csv(path: &Path, outcome: Option<&str>) -> Result<(ImputedDataset, Option<Vec<f64>>)> {
    let t = CsvTable::read(path)?;
    let exclude: Vec<&str> = outcome.into_iter().collect();
    let cols = t.covariates(&exclude);
    let n = t.n();
    let names: Vec<String> = cols.iter().map(|&k| t.header[k].clone()).collect();
    let mut values = DMatrix::zeros(n, cols.len());
    let mut observed = DMatrix::from_element(n, cols.len(), true);
    let mut maskable = Vec::new();
    for (j, &k) in cols.iter().enumerate() {
        let x = t.complete_column(&t.header[k])?;
        for i in 0..n {
            values[(i, j)] = x[i];
        }
        if let Some(r) = t.column(&format!("R_{}", names[j])) {
            maskable.push(j);
            for i in 0..n {
                observed[(i, j)] = r[i] == Some(1.0);
            }
        }
    }
    let y = match outcome {
        Some(name) if t.column(name).is_some() => Some(t.complete_column(name)?),
        _ => None,
    };
    Ok((ImputedDataset::from_parts(names, values, observed, maskable, None)?, y))
}

/// A single named column per row.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let n = columns.first().map_or(0, |c| c.len());
    for i in 0..n {
        w.write_record(columns.iter().map(|c| fmt(c[i])))?;
    }
    w.flush()?;
    Ok(())
}
