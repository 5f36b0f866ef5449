use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::domain::check_schema;
use super::logistic::{irls_logistic, IrlsOptions};
use crate::error::{Error, Result};
use crate::impute::ImputedDataset;
use crate::linalg::{spd_inverse, spd_solve, Standardizer, RIDGE_FLOOR};
use crate::numeric::expit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub kind: OutcomeKind,
    pub feature_names: Vec<String>,
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub std_errors: Option<Vec<f64>>,
    pub intercept_se: Option<f64>,
    /// Weighted residual variance (linear models).
    pub sigma2: Option<f64>,
}

impl OutcomeModel {
    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                let eta = self.intercept + self.coef.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum::<f64>();
                match self.kind {
                    OutcomeKind::Linear => eta,
                    OutcomeKind::Logistic => expit(eta),
                }
            })
            .collect()
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<Vec<f64>> {
    if w.len() != n {
        return Err(Error::LengthMismatch { left: w.len(), right: n });
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Invalid("weights must be finite and non-negative".into()));
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    if mean <= 0.0 {
        return Err(Error::Invalid("weights sum to zero".into()));
    }
    Ok(w.iter().map(|v| v / mean).collect())
}

/// Weighted regression of `y` on the columns of `x`. Weights are rescaled to
/// mean one, so any positive multiple gives the same fit.
pub fn fit_weighted_matrix(
    feature_names: Vec<String>,
    x: &DMatrix<f64>,
    y: &[f64],
    weights: Option<&[f64]>,
    kind: OutcomeKind,
) -> Result<OutcomeModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: y.len(), right: n });
    }
    if feature_names.len() != p {
        return Err(Error::Schema(format!("{} feature names for {p} columns", feature_names.len())));
    }
    if n == 0 {
        return Err(Error::Insufficient("no rows for the outcome model".into()));
    }
    let w = match weights {
        Some(w) => check_weights(w, n)?,
        None => vec![1.0; n],
    };
    match kind {
        OutcomeKind::Logistic => {
            let fit = irls_logistic(x, y, Some(&w), &IrlsOptions::default())?;
            Ok(OutcomeModel {
                kind,
                feature_names,
                intercept: fit.intercept,
                coef: fit.coef,
                std_errors: Some(fit.std_errors),
                intercept_se: Some(fit.intercept_se),
                sigma2: None,
            })
        }
        OutcomeKind::Linear => {
            let rows: Vec<usize> = (0..n).collect();
            let st = Standardizer::fit(x, Some(&rows), Some(&w));
            let keep: Vec<usize> = (0..p).filter(|&j| !st.is_constant(j)).collect();
            let wsum: f64 = w.iter().sum();
            let ybar = w.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / wsum;
            let k = keep.len();
            let z = DMatrix::from_fn(n, k, |i, c| st.apply(keep[c], x[(i, keep[c])]));
            let mut ztwz = DMatrix::zeros(k, k);
            let mut ztwy = DVector::zeros(k);
            for i in 0..n {
                let yc = y[i] - ybar;
                for a in 0..k {
                    ztwy[a] += w[i] * z[(i, a)] * yc;
                    for b in a..k {
                        ztwz[(a, b)] += w[i] * z[(i, a)] * z[(i, b)];
                    }
                }
            }
            for a in 0..k {
                for b in 0..a {
                    ztwz[(a, b)] = ztwz[(b, a)];
                }
            }
            let gamma = if k == 0 {
                DVector::zeros(0)
            } else {
                spd_solve(&ztwz, &ztwy, RIDGE_FLOOR, "weighted outcome regression")?
            };
            let rss: f64 = (0..n)
                .map(|i| {
                    let fitted: f64 = (0..k).map(|a| gamma[a] * z[(i, a)]).sum();
                    w[i] * (y[i] - ybar - fitted).powi(2)
                })
                .sum();
            let sigma2 = rss / (wsum - k as f64 - 1.0).max(1.0);
            let cov = if k == 0 {
                DMatrix::zeros(0, 0)
            } else {
                spd_inverse(&ztwz, RIDGE_FLOOR, "weighted outcome covariance")? * sigma2
            };
            let mut coef = vec![0.0; p];
            let mut se = vec![0.0; p];
            let mut intercept = ybar;
            // intercept = ybar - sum_j m_j / s_j * gamma_j; ybar is uncorrelated with gamma
            let mut a = DVector::zeros(k);
            for (c, &j) in keep.iter().enumerate() {
                coef[j] = gamma[c] / st.scales[j];
                se[j] = cov[(c, c)].sqrt() / st.scales[j];
                intercept -= coef[j] * st.means[j];
                a[c] = st.means[j] / st.scales[j];
            }
            let intercept_var = sigma2 / wsum + a.dot(&(&cov * &a));
            Ok(OutcomeModel {
                kind,
                feature_names,
                intercept,
                coef,
                std_errors: Some(se),
                intercept_se: Some(intercept_var.max(0.0).sqrt()),
                sigma2: Some(sigma2),
            })
        }
    }
}

/// Fit the outcome model on imputed source features (covariates and
/// indicators).
pub fn fit_weighted_outcome(
    source: &ImputedDataset,
    y: &[f64],
    weights: Option<&[f64]>,
    kind: OutcomeKind,
) -> Result<OutcomeModel> {
    fit_weighted_matrix(source.feature_names(), &source.features(), y, weights, kind)
}

/// Predictions for the target rows; the target must carry the same features.
pub fn predict_target(model: &OutcomeModel, target: &ImputedDataset) -> Result<Vec<f64>> {
    check_schema(&model.feature_names, &target.feature_names(), "target schema")?;
    Ok(model.predict_matrix(&target.features()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> (DMatrix<f64>, Vec<f64>) {
        let x = DMatrix::from_row_slice(6, 2, &[0.0, 1.0, 1.0, 0.0, 2.0, 1.0, 3.0, 1.0, 4.0, 0.0, 5.0, 1.0]);
        let y = vec![0.1, 2.2, 3.8, 6.3, 7.9, 9.8];
        (x, y)
    }

    #[test]
    fn unweighted_matches_normal_equations() {
        let (x, y) = line();
        let m = fit_weighted_matrix(vec!["a".into(), "b".into()], &x, &y, None, OutcomeKind::Linear).unwrap();
        // reference: solve [1 x] normal equations directly
        let d = DMatrix::from_fn(6, 3, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let beta = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * DVector::from_vec(y.clone());
        assert!((m.intercept - beta[0]).abs() < 1e-5);
        assert!((m.coef[0] - beta[1]).abs() < 1e-5);
        assert!((m.coef[1] - beta[2]).abs() < 1e-5);
    }

    #[test]
    fn weight_scale_invariance() {
        let (x, y) = line();
        let w = vec![0.5, 1.0, 3.0, 0.2, 1.0, 2.0];
        let w7: Vec<f64> = w.iter().map(|v| v * 7.0).collect();
        let names = vec!["a".into(), "b".into()];
        let a = fit_weighted_matrix(names.clone(), &x, &y, Some(&w), OutcomeKind::Linear).unwrap();
        let b = fit_weighted_matrix(names, &x, &y, Some(&w7), OutcomeKind::Linear).unwrap();
        assert!((a.intercept - b.intercept).abs() < 1e-10);
        for j in 0..2 {
            assert!((a.coef[j] - b.coef[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn weight_two_equals_duplicate_row() {
        let (x, y) = line();
        let mut w = vec![1.0; 6];
        w[2] = 2.0;
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let a = fit_weighted_matrix(names.clone(), &x, &y, Some(&w), OutcomeKind::Linear).unwrap();
        let xd = x.clone().insert_row(6, 0.0);
        let xd = {
            let mut m = xd;
            m[(6, 0)] = x[(2, 0)];
            m[(6, 1)] = x[(2, 1)];
            m
        };
        let mut yd = y.clone();
        yd.push(y[2]);
        let b = fit_weighted_matrix(names, &xd, &yd, None, OutcomeKind::Linear).unwrap();
        assert!((a.intercept - b.intercept).abs() < 1e-5);
        for j in 0..2 {
            assert!((a.coef[j] - b.coef[j]).abs() < 1e-5);
        }
    }

    #[test]
    fn bad_weights_rejected() {
        let (x, y) = line();
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let neg = vec![1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(fit_weighted_matrix(names.clone(), &x, &y, Some(&neg), OutcomeKind::Linear).is_err());
        assert!(fit_weighted_matrix(names.clone(), &x, &y, Some(&[1.0; 5]), OutcomeKind::Linear).is_err());
        assert!(fit_weighted_matrix(names, &x, &y, Some(&[0.0; 6]), OutcomeKind::Linear).is_err());
    }
}
