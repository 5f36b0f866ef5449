use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

/// Noise treatment of a Bayesian linear regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Unknown variance with an inverse-gamma prior; the coefficient prior
    /// covariance is scaled by the noise variance (normal-inverse-gamma).
    InverseGamma { shape: f64, scale: f64 },
    /// Fixed noise variance; the coefficient prior is not scaled.
    Known(f64),
}

/// Posterior of `y = X b + e` under a normal prior `b ~ N(m0, sd^2 I)`.
#[derive(Debug, Clone)]
pub struct ConjugatePosterior {
    pub mean: DVector<f64>,
    /// Posterior precision (up to the noise scale in the inverse-gamma case).
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    pub noise: NoiseModel,
}

pub fn conjugate_posterior(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    prior_mean: &DVector<f64>,
    prior_sd: f64,
    noise: NoiseModel,
) -> Result<ConjugatePosterior> {
    if !(prior_sd > 0.0 && prior_sd.is_finite()) {
        return Err(Error::Config(format!("prior sd must be positive, got {prior_sd}")));
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if prior_mean.len() != x.ncols() {
        return Err(Error::LengthMismatch {
            left: prior_mean.len(),
            right: x.ncols(),
        });
    }
    let xtx = x.transpose() * x;
    let xty = x.transpose() * y;
    posterior_from_moments(&xtx, &xty, y.norm_squared(), y.len(), prior_mean, prior_sd, noise)
}

/// Same as [`conjugate_posterior`] but from sufficient statistics.
pub(crate) fn posterior_from_moments(
    xtx: &DMatrix<f64>,
    xty: &DVector<f64>,
    yty: f64,
    n: usize,
    prior_mean: &DVector<f64>,
    prior_sd: f64,
    noise: NoiseModel,
) -> Result<ConjugatePosterior> {
    let p = xtx.nrows();
    let prior_prec = 1.0 / (prior_sd * prior_sd);
    let (precision, rhs, noise) = match noise {
        NoiseModel::InverseGamma { shape, scale } => {
            if !(shape > 0.0 && scale > 0.0) {
                return Err(Error::Config(format!(
                    "inverse-gamma shape and scale must be positive, got {shape} and {scale}"
                )));
            }
            let precision = DMatrix::identity(p, p) * prior_prec + xtx;
            let rhs = prior_mean * prior_prec + xty;
            (precision, rhs, noise)
        }
        NoiseModel::Known(var) => {
            if var.is_nan() || var <= 0.0 {
                return Err(Error::Config(format!("noise variance must be positive, got {var}")));
            }
            let precision = DMatrix::identity(p, p) * prior_prec + xtx / var;
            let rhs = prior_mean * prior_prec + xty / var;
            (precision, rhs, noise)
        }
    };
    let chol = precision.clone().cholesky().ok_or_else(|| Error::Singular {
        context: "posterior precision".into(),
    })?;
    let mean = chol.solve(&rhs);
    let noise = match noise {
        NoiseModel::InverseGamma { shape, scale } => {
            let quad = yty + prior_prec * prior_mean.norm_squared() - mean.dot(&(&precision * &mean));
            NoiseModel::InverseGamma {
                shape: shape + 0.5 * n as f64,
                scale: scale + 0.5 * quad.max(0.0),
            }
        }
        k => k,
    };
    Ok(ConjugatePosterior {
        mean,
        precision,
        chol,
        noise,
    })
}

impl ConjugatePosterior {
    /// Posterior mean of the noise variance, when it has one.
    pub fn noise_mean(&self) -> Option<f64> {
        match self.noise {
            NoiseModel::InverseGamma { shape, scale } if shape > 1.0 => Some(scale / (shape - 1.0)),
            NoiseModel::InverseGamma { .. } => None,
            NoiseModel::Known(v) => Some(v),
        }
    }

    /// Marginal posterior covariance of the coefficients given a noise variance.
    pub fn covariance(&self, sigma2: f64) -> DMatrix<f64> {
        match self.noise {
            NoiseModel::InverseGamma { .. } => self.chol.inverse() * sigma2,
            NoiseModel::Known(_) => self.chol.inverse(),
        }
    }

    /// One joint draw of (coefficients, noise variance).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let (sigma2, scale) = match self.noise {
            NoiseModel::InverseGamma { shape, scale } => {
                let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
                let s2 = scale / g;
                (s2, s2.sqrt())
            }
            NoiseModel::Known(v) => (v, 1.0),
        };
        let z = DVector::from_fn(self.mean.len(), |_, _| StandardNormal.sample(rng));
        let dev = self.chol.l().tr_solve_lower_triangular(&z).expect("triangular factor is invertible");
        (&self.mean + dev * scale, sigma2)
    }
}
