use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Standardizer, RIDGE_FLOOR};
use crate::numeric::{expit, log1pexp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrlsOptions {
    pub max_iter: usize,
    /// Convergence threshold on the largest Newton step (standardized scale).
    pub tol: f64,
    /// A standardized coefficient beyond this magnitude is reported as separation.
    pub separation_threshold: f64,
    /// Ridge penalty on the standardized slopes (0 = maximum likelihood).
    pub l2: f64,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        IrlsOptions {
            max_iter: 100,
            tol: 1e-8,
            separation_threshold: 50.0,
            l2: 0.0,
        }
    }
}

/// Logistic regression fit on the original scale of its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub intercept: f64,
    pub coef: Vec<f64>,
    pub intercept_se: f64,
    /// Zero for predictors dropped as constant.
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn logit(&self, row: &[f64]) -> f64 {
        self.intercept + row.iter().zip(&self.coef).map(|(x, b)| x * b).sum::<f64>()
    }

    pub fn logit_row(&self, x: &DMatrix<f64>, i: usize) -> f64 {
        self.intercept + self.coef.iter().enumerate().map(|(j, b)| b * x[(i, j)]).sum::<f64>()
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        expit(self.logit(row))
    }
}

/// Newton-Raphson / IRLS fit of `P(y = 1 | x) = expit(a + x b)` with
/// optional non-negative row weights. Predictors are standardized
/// internally; a tiny ridge stabilizes the Hessian without moving the
/// fixed point away from the maximum-likelihood estimate.
pub fn irls_logistic(x: &DMatrix<f64>, y: &[f64], weights: Option<&[f64]>, opts: &IrlsOptions) -> Result<LogisticFit> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: y.len(), right: n });
    }
    if let Some(w) = weights {
        if w.len() != n {
            return Err(Error::LengthMismatch { left: w.len(), right: n });
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Invalid("weights must be finite and non-negative".into()));
        }
    }
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::Invalid("logistic response must be 0/1".into()));
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..n).map(w).sum();
    let ysum: f64 = (0..n).map(|i| w(i) * y[i]).sum();
    if wsum <= 0.0 {
        return Err(Error::Insufficient("logistic regression with zero total weight".into()));
    }
    if ysum <= 0.0 || ysum >= wsum {
        return Err(Error::Separation {
            iteration: 0,
            max_coef: f64::INFINITY,
        });
    }

    let st = Standardizer::fit(x, None, None);
    let keep: Vec<usize> = (0..p).filter(|&j| !st.is_constant(j)).collect();
    let k = keep.len() + 1;
    let z = DMatrix::from_fn(n, k, |i, c| if c == 0 { 1.0 } else { st.apply(keep[c - 1], x[(i, keep[c - 1])]) });

    let l2 = opts.l2;
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::Config(format!("l2 penalty must be non-negative, got {l2}")));
    }
    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &z * beta;
        let penalty = 0.5 * l2 * beta.iter().skip(1).map(|b| b * b).sum::<f64>();
        (0..n).map(|i| w(i) * (y[i] * eta[i] - log1pexp(eta[i]))).sum::<f64>() - penalty
    };
    let mut beta = DVector::zeros(k);
    let ybar = ysum / wsum;
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = loglik(&beta);
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut hess = DMatrix::zeros(k, k);
    while iterations < opts.max_iter {
        iterations += 1;
        let eta = &z * &beta;
        let mut grad = DVector::zeros(k);
        let mut max_resid = 0.0f64;
        hess.fill(0.0);
        for i in 0..n {
            let mu = expit(eta[i]);
            let wi = w(i);
            if wi > 0.0 {
                max_resid = max_resid.max((y[i] - mu).abs());
            }
            let zi = z.row(i);
            let r = wi * (y[i] - mu);
            let v = wi * mu * (1.0 - mu);
            for a in 0..k {
                grad[a] += r * zi[a];
                for b in a..k {
                    hess[(a, b)] += v * zi[a] * zi[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        for a in 1..k {
            grad[a] -= l2 * beta[a];
            hess[(a, a)] += l2;
        }
        grad_norm = grad.norm();
        // every row fitted almost exactly: the likelihood has no finite maximizer
        if l2 == 0.0 && max_resid < 1e-6 {
            return Err(Error::Separation {
                iteration: iterations,
                max_coef: beta.iter().skip(1).fold(0.0f64, |m, b| m.max(b.abs())),
            });
        }
        let mut h = hess.clone();
        for a in 0..k {
            h[(a, a)] += RIDGE_FLOOR;
        }
        let step = h
            .cholesky()
            .ok_or_else(|| Error::Singular {
                context: "logistic Hessian".into(),
            })?
            .solve(&grad);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let cll = loglik(&cand);
            if cll.is_finite() && cll >= ll - 1e-12 * ll.abs().max(1.0) {
                beta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let max_coef = beta.iter().skip(1).fold(0.0f64, |m, b| m.max(b.abs()));
        if max_coef > opts.separation_threshold || !beta.iter().all(|b| b.is_finite()) {
            return Err(Error::Separation {
                iteration: iterations,
                max_coef,
            });
        }
        let max_step = step.amax() * t;
        if !accepted || max_step < opts.tol {
            converged = accepted || grad_norm < opts.tol.sqrt() * wsum;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            grad_norm,
        });
    }

    // covariance on the standardized scale, mapped back
    let mut h = hess;
    for a in 0..k {
        h[(a, a)] += RIDGE_FLOOR;
    }
    let cov = h.cholesky().map(|c| c.inverse()).ok_or_else(|| Error::Singular {
        context: "logistic covariance".into(),
    })?;
    let mut coef = vec![0.0; p];
    let mut std_errors = vec![0.0; p];
    let mut intercept = beta[0];
    // intercept = gamma0 - sum gamma_j m_j / s_j
    let mut a = DVector::zeros(k);
    a[0] = 1.0;
    for (c, &j) in keep.iter().enumerate() {
        coef[j] = beta[c + 1] / st.scales[j];
        std_errors[j] = cov[(c + 1, c + 1)].sqrt() / st.scales[j];
        intercept -= coef[j] * st.means[j];
        a[c + 1] = -st.means[j] / st.scales[j];
    }
    let intercept_se = (a.dot(&(&cov * &a))).max(0.0).sqrt();
    Ok(LogisticFit {
        intercept,
        coef,
        intercept_se,
        std_errors,
        loglik: ll,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn data(n: usize, a: f64, b: f64, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = SeedTree::new(seed).rng();
        let x = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng));
        let y = (0..n)
            .map(|i| {
                let u: f64 = rng.random();
                (u < expit(a + b * x[(i, 0)])) as u8 as f64
            })
            .collect();
        (x, y)
    }

    // brute-force maximization of the 2-parameter log-likelihood
    fn grid_mle(x: &DMatrix<f64>, y: &[f64]) -> (f64, f64) {
        let ll = |a: f64, b: f64| -> f64 {
            (0..y.len())
                .map(|i| {
                    let e = a + b * x[(i, 0)];
                    y[i] * e - log1pexp(e)
                })
                .sum()
        };
        let (mut a, mut b, mut h) = (0.0, 0.0, 1.0);
        while h > 1e-7 {
            let mut best = (ll(a, b), a, b);
            for da in [-h, 0.0, h] {
                for db in [-h, 0.0, h] {
                    let v = ll(a + da, b + db);
                    if v > best.0 {
                        best = (v, a + da, b + db);
                    }
                }
            }
            if best.1 == a && best.2 == b {
                h *= 0.5;
            }
            a = best.1;
            b = best.2;
        }
        (a, b)
    }

    #[test]
    fn matches_grid_search() {
        let (x, y) = data(400, -0.3, 1.2, 1);
        let fit = irls_logistic(&x, &y, None, &IrlsOptions::default()).unwrap();
        let (a, b) = grid_mle(&x, &y);
        assert!((fit.intercept - a).abs() < 1e-4, "{} {}", fit.intercept, a);
        assert!((fit.coef[0] - b).abs() < 1e-4, "{} {}", fit.coef[0], b);
    }

    #[test]
    fn separation_detected() {
        let x = DMatrix::from_row_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        assert!(matches!(
            irls_logistic(&x, &y, None, &IrlsOptions::default()),
            Err(Error::Separation { .. })
        ));
        let y = [1.0; 6];
        assert!(matches!(
            irls_logistic(&x, &y, None, &IrlsOptions::default()),
            Err(Error::Separation { .. })
        ));
    }

    #[test]
    fn weights_equal_duplication() {
        let (x, y) = data(100, 0.2, -0.7, 2);
        let mut w = vec![1.0; 100];
        w[3] = 2.0;
        let fw = irls_logistic(&x, &y, Some(&w), &IrlsOptions::default()).unwrap();
        let xd = x.clone().insert_row(100, x[(3, 0)]);
        let mut yd = y.clone();
        yd.push(y[3]);
        let fd = irls_logistic(&xd, &yd, None, &IrlsOptions::default()).unwrap();
        assert!((fw.coef[0] - fd.coef[0]).abs() < 1e-6);
        assert!((fw.intercept - fd.intercept).abs() < 1e-6);
    }

    #[test]
    fn standard_errors_shrink_with_n() {
        let (x, y) = data(200, 0.0, 1.0, 3);
        let small = irls_logistic(&x, &y, None, &IrlsOptions::default()).unwrap();
        let (x, y) = data(3200, 0.0, 1.0, 3);
        let big = irls_logistic(&x, &y, None, &IrlsOptions::default()).unwrap();
        let ratio = small.std_errors[0] / big.std_errors[0];
        assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
    }

    #[test]
    fn ridge_penalty_bounds_separated_fit() {
        let x = DMatrix::from_row_slice(6, 1, &[-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]);
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let opts = IrlsOptions {
            l2: 1.0,
            ..Default::default()
        };
        let fit = irls_logistic(&x, &y, None, &opts).unwrap();
        assert!(fit.coef[0] > 0.0 && fit.coef[0].is_finite());
        // stationarity of the penalized objective on the standardized scale
        let sd = (x.iter().map(|v| v * v).sum::<f64>() / 6.0).sqrt();
        let g: f64 = (0..6).map(|i| (y[i] - fit.probability(&[x[(i, 0)]])) * x[(i, 0)] / sd).sum();
        assert!((g - fit.coef[0] * sd).abs() < 1e-6, "{g}");
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let (x, y) = data(200, 0.0, 1.0, 4);
        let opts = IrlsOptions {
            max_iter: 1,
            ..Default::default()
        };
        assert!(matches!(irls_logistic(&x, &y, None, &opts), Err(Error::NonConvergence { .. })));
    }
}
