use serde::{Deserialize, Serialize};

use crate::adapt::{fit_weighted_matrix, OutcomeKind, OutcomeModel};
use crate::error::{Error, Result};
use crate::simgen::MaskedDataset;

/// Squared error of a conditional-mean estimate split by whether the row is
/// complete. `term0`/`term1` are the stratum means (`None` for an empty
/// stratum); `p0 * term0 + (1 - p0) * term1` is the pooled mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseDecomposition {
    pub p0: f64,
    pub n0: usize,
    pub n1: usize,
    pub term0: Option<f64>,
    pub term1: Option<f64>,
    pub pooled: f64,
}

impl MseDecomposition {
    /// Contribution of the incomplete rows to the pooled mean.
    pub fn weighted0(&self) -> f64 {
        self.p0 * self.term0.unwrap_or(0.0)
    }

    pub fn weighted1(&self) -> f64 {
        (1.0 - self.p0) * self.term1.unwrap_or(0.0)
    }
}

/// `reference` is the quantity being estimated, normally the true
/// conditional mean; `complete[i]` is true when row `i` has no NA.
pub fn mse_decomposition(predictions: &[f64], reference: &[f64], complete: &[bool]) -> Result<MseDecomposition> {
    let n = predictions.len();
    if reference.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: reference.len(),
        });
    }
    if complete.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: complete.len(),
        });
    }
    if n == 0 {
        return Err(Error::Insufficient("no rows to decompose".into()));
    }
    let (mut s0, mut s1, mut n0) = (0.0, 0.0, 0usize);
    for i in 0..n {
        let e = (predictions[i] - reference[i]).powi(2);
        if complete[i] {
            s1 += e;
        } else {
            s0 += e;
            n0 += 1;
        }
    }
    let n1 = n - n0;
    Ok(MseDecomposition {
        p0: n0 as f64 / n as f64,
        n0,
        n1,
        term0: (n0 > 0).then(|| s0 / n0 as f64),
        term1: (n1 > 0).then(|| s1 / n1 as f64),
        pooled: (s0 + s1) / n as f64,
    })
}

/// Ordinary least squares of the outcome on the covariates over complete rows.
pub fn complete_case_fit(ds: &MaskedDataset) -> Result<OutcomeModel> {
    let y = ds
        .outcome()
        .ok_or_else(|| Error::Insufficient("complete-case fit needs the outcome".into()))?;
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| (0..ds.p()).all(|j| ds.is_observed(i, j))).collect();
    if rows.len() < ds.p() + 1 {
        return Err(Error::Insufficient(format!(
            "{} complete rows for {} covariates",
            rows.len(),
            ds.p()
        )));
    }
    let x = nalgebra::DMatrix::from_fn(rows.len(), ds.p(), |r, j| ds.raw_values()[(rows[r], j)]);
    let yc: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    fit_weighted_matrix(ds.names().to_vec(), &x, &yc, None, OutcomeKind::Linear)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::Domain;

    #[test]
    fn all_complete_has_no_term0() {
        let d = mse_decomposition(&[1.0, 2.0], &[0.0, 0.0], &[true, true]).unwrap();
        assert_eq!(d.term0, None);
        assert_eq!(d.term1, Some(2.5));
        assert_eq!(d.pooled, 2.5);
        assert_eq!(d.weighted0(), 0.0);
    }

    #[test]
    fn strata_reassemble_pooled() {
        let pred = [0.3, -1.2, 2.0, 0.0, 5.5];
        let truth = [0.1, -1.0, 1.0, 0.4, 5.0];
        let d = mse_decomposition(&pred, &truth, &[true, false, true, false, false]).unwrap();
        assert!((d.weighted0() + d.weighted1() - d.pooled).abs() < 1e-12);
        assert_eq!(d.p0, 0.6);
    }

    #[test]
    fn length_mismatch() {
        assert!(mse_decomposition(&[1.0], &[1.0, 2.0], &[true]).is_err());
        assert!(mse_decomposition(&[], &[], &[]).is_err());
    }

    #[test]
    fn complete_case_without_missingness_is_ols() {
        let rows: Vec<Vec<Option<f64>>> = (0..6).map(|i| vec![Some(i as f64), Some(((i * 7) % 5) as f64)]).collect();
        let y: Vec<f64> = (0..6).map(|i| 1.0 + 2.0 * i as f64 - ((i * 7) % 5) as f64 + [0.1, -0.1][i % 2]).collect();
        let ds = MaskedDataset::from_cells(vec!["a".into(), "b".into()], &rows, &[], Some(y.clone()), Domain::Source)
            .unwrap();
        let m = complete_case_fit(&ds).unwrap();
        let x = nalgebra::DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => ((i * 7) % 5) as f64,
        });
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * nalgebra::DVector::from_vec(y);
        assert!((m.intercept - beta[0]).abs() < 1e-6);
        assert!((m.coef[0] - beta[1]).abs() < 1e-6);
        assert!((m.coef[1] - beta[2]).abs() < 1e-6);
    }

    #[test]
    fn too_few_complete_rows() {
        let rows = vec![vec![Some(1.0), None], vec![Some(2.0), Some(1.0)]];
        let ds =
            MaskedDataset::from_cells(vec!["a".into(), "b".into()], &rows, &[], Some(vec![0.0, 1.0]), Domain::Source)
                .unwrap();
        assert!(matches!(complete_case_fit(&ds), Err(Error::Insufficient(_))));
    }
}
