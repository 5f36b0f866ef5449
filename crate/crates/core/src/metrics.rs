//! Evaluation measures. Imputation RMSE pools every masked cell of a domain
//! (per-cell, not per-column, averaging).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::midranks;

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::Insufficient("empty input".into()));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    same_len(pred.len(), truth.len())?;
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// RMSE over cells with `observed == false`; `None` when nothing is masked.
pub fn imputation_rmse(imputed: &DMatrix<f64>, truth: &DMatrix<f64>, observed: &DMatrix<bool>) -> Result<Option<f64>> {
    if imputed.shape() != truth.shape() || imputed.shape() != observed.shape() {
        return Err(Error::Schema(format!(
            "shapes differ: imputed {:?}, truth {:?}, mask {:?}",
            imputed.shape(),
            truth.shape(),
            observed.shape()
        )));
    }
    let mut sse = 0.0;
    let mut cells = 0usize;
    for ((v, t), o) in imputed.iter().zip(truth.iter()).zip(observed.iter()) {
        if !o {
            sse += (v - t).powi(2);
            cells += 1;
        }
    }
    Ok((cells > 0).then(|| (sse / cells as f64).sqrt()))
}

fn check_labels(labels: &[f64]) -> Result<()> {
    if labels.iter().any(|l| *l != 0.0 && *l != 1.0) {
        return Err(Error::Invalid("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Mean squared difference between probabilities and 0/1 labels.
pub fn brier(probs: &[f64], labels: &[f64]) -> Result<f64> {
    same_len(probs.len(), labels.len())?;
    check_labels(labels)?;
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Invalid("probabilities must lie in [0, 1]".into()));
    }
    Ok(probs.iter().zip(labels).map(|(p, l)| (p - l).powi(2)).sum::<f64>() / probs.len() as f64)
}

/// Area under the ROC curve from the rank-sum statistic with midranks for
/// ties; `None` when only one class is present.
pub fn auroc(scores: &[f64], labels: &[f64]) -> Result<Option<f64>> {
    same_len(scores.len(), labels.len())?;
    check_labels(labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    let n1 = labels.iter().filter(|l| **l == 1.0).count();
    let n0 = labels.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Ok(None);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l == 1.0).map(|(r, _)| r).sum();
    let u = rank_sum - (n1 * (n1 + 1)) as f64 / 2.0;
    Ok(Some(u / (n0 as f64 * n1 as f64)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCurve {
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
    pub y_se: Vec<f64>,
    pub count: Vec<usize>,
}

/// Sort by `x`, cut into `bins` groups of (nearly) equal size and average
/// both coordinates in each.
pub fn binned_error_curve(x: &[f64], y: &[f64], bins: usize) -> Result<BinnedCurve> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if bins < 2 {
        return Err(Error::Config("at least two bins are required".into()));
    }
    if x.len() < bins {
        return Err(Error::Insufficient(format!("{} rows for {bins} bins", x.len())));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let n = idx.len();
    let mut curve = BinnedCurve {
        x_mean: Vec::with_capacity(bins),
        y_mean: Vec::with_capacity(bins),
        y_se: Vec::with_capacity(bins),
        count: Vec::with_capacity(bins),
    };
    for b in 0..bins {
        let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
        let members = &idx[lo..hi];
        let k = members.len() as f64;
        let xm = members.iter().map(|&i| x[i]).sum::<f64>() / k;
        let ym = members.iter().map(|&i| y[i]).sum::<f64>() / k;
        let var = if members.len() > 1 {
            members.iter().map(|&i| (y[i] - ym).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        curve.x_mean.push(xm);
        curve.y_mean.push(ym);
        curve.y_se.push((var / k).sqrt());
        curve.count.push(members.len());
    }
    Ok(curve)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub target_rmse: f64,
    pub imp_rmse_source: Option<f64>,
    pub imp_rmse_target: Option<f64>,
    pub brier: Option<f64>,
    pub auroc: Option<f64>,
    pub n_masked_source: usize,
    pub n_masked_target: usize,
}
