use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cell::SimCellResult;
use super::config::Method;
use crate::error::{Error, Result};
use crate::metrics::binned_error_curve;
use crate::numeric::{mean, quantile, sd};

/// Marginal summary of one method within one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub method: String,
    /// Stratifying variable (`all`, `miss_pct`, `dag`, `nonlinearity`).
    pub stratum: String,
    pub level: String,
    pub rows: usize,
    pub ok: usize,
    pub mean_target_rmse: Option<f64>,
    pub sd_target_rmse: Option<f64>,
    pub q10_target_rmse: Option<f64>,
    pub q50_target_rmse: Option<f64>,
    pub q90_target_rmse: Option<f64>,
    pub mean_imp_rmse_source: Option<f64>,
    pub mean_imp_rmse_target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Method name, or `all` for the pooled curve.
    pub method: String,
    pub bin: usize,
    pub imp_rmse_target: f64,
    pub target_rmse: f64,
    pub target_rmse_se: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub notes: Vec<String>,
    pub by_method: Vec<StratumSummary>,
    pub by_miss_pct: Vec<StratumSummary>,
    pub by_dag: Vec<StratumSummary>,
    pub by_nonlinearity: Vec<StratumSummary>,
    pub curves: Vec<CurvePoint>,
}

impl Report {
    pub fn method(&self, m: Method) -> Option<&StratumSummary> {
        self.by_method.iter().find(|s| s.method == m.as_str())
    }
}

const CURVE_BINS: usize = 10;

fn summarize(method: Method, stratum: &str, level: String, rows: &[&SimCellResult]) -> StratumSummary {
    let ok: Vec<&&SimCellResult> = rows.iter().filter(|r| r.is_ok()).collect();
    let rmse: Vec<f64> = ok.iter().filter_map(|r| r.target_rmse).collect();
    let src: Vec<f64> = ok.iter().filter_map(|r| r.imp_rmse_source).collect();
    let tgt: Vec<f64> = ok.iter().filter_map(|r| r.imp_rmse_target).collect();
    let some = |xs: &[f64], f: &dyn Fn(&[f64]) -> f64| (!xs.is_empty()).then(|| f(xs));
    StratumSummary {
        method: method.as_str().to_string(),
        stratum: stratum.to_string(),
        level,
        rows: rows.len(),
        ok: ok.len(),
        mean_target_rmse: some(&rmse, &mean),
        sd_target_rmse: some(&rmse, &sd),
        q10_target_rmse: some(&rmse, &|x| quantile(x, 0.1)),
        q50_target_rmse: some(&rmse, &|x| quantile(x, 0.5)),
        q90_target_rmse: some(&rmse, &|x| quantile(x, 0.9)),
        mean_imp_rmse_source: some(&src, &mean),
        mean_imp_rmse_target: some(&tgt, &mean),
    }
}

/// Every method crossed with every observed level of `key`.
fn stratify<K: Ord + ToString>(
    rows: &[SimCellResult],
    methods: &BTreeSet<Method>,
    stratum: &str,
    key: impl Fn(&SimCellResult) -> K,
) -> Vec<StratumSummary> {
    let levels: BTreeSet<K> = rows.iter().map(&key).collect();
    let mut out = Vec::new();
    for &m in methods {
        for level in &levels {
            let members: Vec<&SimCellResult> = rows.iter().filter(|r| r.method == m && key(r) == *level).collect();
            out.push(summarize(m, stratum, level.to_string(), &members));
        }
    }
    out
}

/// Ordered wrapper so float levels can be grouped.
struct Level(f64);

impl PartialEq for Level {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Level {}

impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn curve(label: &str, rows: &[&SimCellResult]) -> Result<Vec<CurvePoint>> {
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.is_ok())
        .filter_map(|r| Some((r.imp_rmse_target?, r.target_rmse?)))
        .collect();
    let bins = CURVE_BINS.min(pairs.len() / 3);
    if bins < 2 {
        return Ok(Vec::new());
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let c = binned_error_curve(&x, &y, bins)?;
    Ok((0..bins)
        .map(|b| CurvePoint {
            method: label.to_string(),
            bin: b,
            imp_rmse_target: c.x_mean[b],
            target_rmse: c.y_mean[b],
            target_rmse_se: c.y_se[b],
            count: c.count[b],
        })
        .collect())
}

pub fn build_report(rows: &[SimCellResult]) -> Result<Report> {
    if !rows.iter().any(|r| r.is_ok()) {
        return Err(Error::Insufficient("no rows with status ok".into()));
    }
    let methods: BTreeSet<Method> = rows.iter().map(|r| r.method).collect();
    let by_method = stratify(rows, &methods, "all", |_| "all");
    let by_miss_pct = stratify(rows, &methods, "miss_pct", |r| Level(r.miss_pct));
    let by_dag = stratify(rows, &methods, "dag", |r| r.dag);
    let by_nonlinearity = stratify(rows, &methods, "nonlinearity", |r| r.nonlinearity);
    let all: Vec<&SimCellResult> = rows.iter().collect();
    let mut curves = curve("all", &all)?;
    for &m in &methods {
        let members: Vec<&SimCellResult> = rows.iter().filter(|r| r.method == m).collect();
        curves.extend(curve(m.as_str(), &members)?);
    }
    Ok(Report {
        notes: vec![
            "imputation RMSE pools every masked cell of a domain within a simulation cell before the square root".into(),
            "quantiles and means are over rows with status ok".into(),
        ],
        by_method,
        by_miss_pct,
        by_dag,
        by_nonlinearity,
        curves,
    })
}

fn write_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for it in items {
        w.serialize(it)?;
    }
    w.flush()?;
    Ok(())
}

/// Write the summary tables and `report.json` into `out_dir`.
pub fn emit_report(rows: &[SimCellResult], out_dir: &Path) -> Result<Report> {
    let report = build_report(rows)?;
    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join("summary_by_method.csv"), &report.by_method)?;
    write_csv(&out_dir.join("summary_by_miss_pct.csv"), &report.by_miss_pct)?;
    write_csv(&out_dir.join("summary_by_dag.csv"), &report.by_dag)?;
    write_csv(&out_dir.join("summary_by_nonlinearity.csv"), &report.by_nonlinearity)?;
    write_csv(&out_dir.join("error_curves.csv"), &report.curves)?;
    fs::write(out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
