//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge floor added to every normal-equation solve.
pub const RIDGE_FLOOR: f64 = 1e-6;

/// Solve `(a + ridge * I) x = b` for symmetric positive (semi-)definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>, ridge: f64, context: &str) -> Result<DVector<f64>> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    let chol = m.cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
    })?;
    let x = chol.solve(b);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular {
            context: context.to_string(),
        })
    }
}

/// Inverse of a symmetric positive definite matrix plus ridge.
pub fn spd_inverse(a: &DMatrix<f64>, ridge: f64, context: &str) -> Result<DMatrix<f64>> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    let chol = m.cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
    })?;
    Ok(chol.inverse())
}

/// Per-column centering and scaling. Columns with (numerically) zero spread
/// are flagged as constant and carry scale 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Fit on the given rows of `x` (all rows when `rows` is `None`), with
    /// optional row weights aligned to the selected rows.
    pub fn fit(x: &DMatrix<f64>, rows: Option<&[usize]>, weights: Option<&[f64]>) -> Self {
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..x.nrows()).collect();
                &all
            }
        };
        let wsum: f64 = match weights {
            Some(w) => w.iter().sum(),
            None => rows.len() as f64,
        };
        let p = x.ncols();
        let mut means = vec![0.0; p];
        let mut scales = vec![0.0; p];
        for j in 0..p {
            let mut m = 0.0;
            for (k, &i) in rows.iter().enumerate() {
                let w = weights.map_or(1.0, |w| w[k]);
                m += w * x[(i, j)];
            }
            m /= wsum;
            let mut v = 0.0;
            for (k, &i) in rows.iter().enumerate() {
                let w = weights.map_or(1.0, |w| w[k]);
                v += w * (x[(i, j)] - m).powi(2);
            }
            v /= wsum;
            let s = v.sqrt();
            means[j] = m;
            scales[j] = if s > 1e-12 * (1.0 + m.abs()) { s } else { 0.0 };
        }
        Standardizer { means, scales }
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.scales[j] == 0.0
    }

    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.scales[j] == 0.0 {
            0.0
        } else {
            (v - self.means[j]) / self.scales[j]
        }
    }
}

/// An affine predictor on the original scale of its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Residual variance on the fitting rows.
    pub sigma2: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict_row(&self, x: &DMatrix<f64>, i: usize, cols: &[usize]) -> f64 {
        self.intercept + cols.iter().zip(&self.coef).map(|(&c, b)| b * x[(i, c)]).sum::<f64>()
    }
}

/// Ridge-stabilized least squares of `y` on `x[rows, cols]` with an intercept.
/// Predictors are standardized internally; constant predictors get coefficient 0.
pub fn fit_linear(
    x: &DMatrix<f64>,
    cols: &[usize],
    rows: &[usize],
    y: &[f64],
    ridge: f64,
) -> Result<LinearFit> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Insufficient("no rows to fit".into()));
    }
    let sub = DMatrix::from_fn(n, cols.len(), |r, c| x[(rows[r], cols[c])]);
    let st = Standardizer::fit(&sub, None, None);
    let keep: Vec<usize> = (0..cols.len()).filter(|&j| !st.is_constant(j)).collect();
    let ybar = y.iter().sum::<f64>() / n as f64;
    let z = DMatrix::from_fn(n, keep.len(), |r, c| st.apply(keep[c], sub[(r, keep[c])]));
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ybar));
    let gamma = if keep.is_empty() {
        DVector::zeros(0)
    } else {
        let ztz = z.transpose() * &z;
        let zty = z.transpose() * &yc;
        spd_solve(&ztz, &zty, ridge, "linear regression")?
    };
    let mut coef = vec![0.0; cols.len()];
    let mut intercept = ybar;
    for (k, &j) in keep.iter().enumerate() {
        coef[j] = gamma[k] / st.scales[j];
        intercept -= coef[j] * st.means[j];
    }
    let resid = &yc - &z * &gamma;
    let dof = (n as f64 - keep.len() as f64 - 1.0).max(1.0);
    let sigma2 = resid.norm_squared() / dof;
    Ok(LinearFit {
        intercept,
        coef,
        sigma2,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let y = [1.0, 3.0, 5.0, 7.0];
        let fit = fit_linear(&x, &[0], &[0, 1, 2, 3], &y, RIDGE_FLOOR).unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-6);
        assert!((fit.coef[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_predictor_gives_mean() {
        let x = DMatrix::from_row_slice(3, 1, &[5.0, 5.0, 5.0]);
        let y = [1.0, 2.0, 6.0];
        let fit = fit_linear(&x, &[0], &[0, 1, 2], &y, RIDGE_FLOOR).unwrap();
        assert_eq!(fit.coef[0], 0.0);
        assert!((fit.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_without_ridge_is_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(spd_solve(&a, &b, 0.0, "t").is_err());
        assert!(spd_solve(&a, &b, 1e-6, "t").is_ok());
    }
}
