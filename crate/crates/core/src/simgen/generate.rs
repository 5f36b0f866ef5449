use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::dag::DagSpec;
use super::params::StructuralParams;
use crate::error::{Error, Result};
use crate::numeric::expit;
use crate::rng::SeedTree;

/// Ground truth before masking.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteDataset {
    /// n x 3 latent variables.
    pub z: DMatrix<f64>,
    /// n x 3 counterfactual covariates; column 0 is X1 (never masked).
    pub x: DMatrix<f64>,
    /// n x 2 indicators for X2 and X3; `true` means observed.
    pub r: DMatrix<bool>,
    pub y: Vec<f64>,
}

impl CompleteDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn x_row(&self, i: usize) -> [f64; 3] {
        [self.x[(i, 0)], self.x[(i, 1)], self.x[(i, 2)]]
    }

    pub fn r_row(&self, i: usize) -> [f64; 2] {
        [self.r[(i, 0)] as u8 as f64, self.r[(i, 1)] as u8 as f64]
    }
}

pub(crate) struct Covariates {
    pub z: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

pub(crate) fn generate_covariates(n: usize, dag: &DagSpec, params: &StructuralParams, root: &SeedTree) -> Covariates {
    let mut z_rng = root.stream("z");
    let mut x_rng = root.stream("x_noise");
    let mut z = DMatrix::zeros(n, 3);
    let mut x = DMatrix::zeros(n, 3);
    for i in 0..n {
        let zi: [f64; 3] = std::array::from_fn(|k| {
            let e: f64 = StandardNormal.sample(&mut z_rng);
            params.alpha_z[k] + params.sigma_z * e
        });
        let base = params.fz.eval(&zi);
        let noise: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(&mut x_rng));
        let x1 = params.alpha_x[0] + base[0] + params.sigma_x * noise[0];
        let mut x2 = params.alpha_x[1] + base[1] + params.sigma_x * noise[1];
        if dag.x_chain {
            x2 += params.fx[0].eval1(&[x1]);
        }
        let mut x3 = params.alpha_x[2] + base[2] + params.sigma_x * noise[2];
        if dag.x_chain {
            x3 += params.fx[1].eval1(&[x1, x2]);
        }
        for k in 0..3 {
            z[(i, k)] = zi[k];
        }
        x[(i, 0)] = x1;
        x[(i, 1)] = x2;
        x[(i, 2)] = x3;
    }
    Covariates { z, x }
}

/// Linear part of each indicator's logit that does not involve the intercept
/// or the indicator chain.
pub(crate) fn indicator_scores(x: &DMatrix<f64>, params: &StructuralParams) -> Vec<[f64; 2]> {
    (0..x.nrows())
        .map(|i| {
            let g = params.gx.eval(&[x[(i, 0)], x[(i, 1)], x[(i, 2)]]);
            [g[0], g[1]]
        })
        .collect()
}

pub(crate) fn draw_indicators(
    scores: &[[f64; 2]],
    dag: &DagSpec,
    params: &StructuralParams,
    uniforms: &[[f64; 2]],
) -> DMatrix<bool> {
    let n = scores.len();
    let mut r = DMatrix::from_element(n, 2, true);
    for i in 0..n {
        let r2 = uniforms[i][0] < expit(params.alpha_r[0] + scores[i][0]);
        let mut logit3 = params.alpha_r[1] + scores[i][1];
        if dag.r_chain {
            logit3 += params.r_chain * r2 as u8 as f64;
        }
        let r3 = uniforms[i][1] < expit(logit3);
        r[(i, 0)] = r2;
        r[(i, 1)] = r3;
    }
    r
}

pub(crate) fn draw_uniforms(n: usize, root: &SeedTree) -> Vec<[f64; 2]> {
    let mut rng = root.stream("r_uniform");
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

/// Draw `n` rows from the structural equations of `dag` under `params`.
///
/// Each variable family (Z, covariate noise, indicator uniforms, outcome
/// noise) consumes its own stream, so flipping a DAG flag only changes the
/// variables downstream of the flipped edge.
pub fn generate(n: usize, dag: &DagSpec, params: &StructuralParams, seed: u64) -> Result<CompleteDataset> {
    generate_with(n, dag, params, &SeedTree::new(seed))
}

pub(crate) fn generate_with(n: usize, dag: &DagSpec, params: &StructuralParams, root: &SeedTree) -> Result<CompleteDataset> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    params.validate(dag)?;
    let Covariates { z, x } = generate_covariates(n, dag, params, root);
    let scores = indicator_scores(&x, params);
    let uniforms = draw_uniforms(n, root);
    let r = draw_indicators(&scores, dag, params, &uniforms);
    let mut y_rng = root.stream("y_noise");
    let y = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut y_rng);
            let xr = [x[(i, 0)], x[(i, 1)], x[(i, 2)]];
            let rr = [r[(i, 0)] as u8 as f64, r[(i, 1)] as u8 as f64];
            params.outcome_mean(&xr, &rr) + params.sigma_y * e
        })
        .collect();
    Ok(CompleteDataset { z, x, r, y })
}

pub const CALIBRATION_ROWS: usize = 100_000;
pub const CALIBRATION_BRACKET: (f64, f64) = (-200.0, 200.0);

/// Find intercepts `alpha_r` such that the marginal missingness rate
/// P(R_k = 0) of each indicator equals `target_rate`.
///
/// The rate is estimated on `CALIBRATION_ROWS` simulated rows (averaging the
/// Bernoulli probabilities rather than the draws) and inverted by bisection on
/// `CALIBRATION_BRACKET`; the rate is strictly decreasing in the intercept.
/// R2 is calibrated first and its realized values feed the R3 logit when the
/// indicator chain is active.
pub fn calibrate_missingness_intercept(
    params: &StructuralParams,
    dag: &DagSpec,
    target_rate: f64,
    seed: u64,
) -> Result<[f64; 2]> {
    calibrate_with_rows(params, dag, target_rate, seed, CALIBRATION_ROWS)
}

pub fn calibrate_with_rows(
    params: &StructuralParams,
    dag: &DagSpec,
    target_rate: f64,
    seed: u64,
    rows: usize,
) -> Result<[f64; 2]> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::Config(format!("target missingness rate must be in (0, 1), got {target_rate}")));
    }
    params.validate(dag)?;
    let root = SeedTree::new(seed).child("calibration");
    let cov = generate_covariates(rows, dag, params, &root);
    let scores = indicator_scores(&cov.x, params);
    let uniforms = draw_uniforms(rows, &root);

    let rate = |offsets: &dyn Fn(usize) -> f64, alpha: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..rows {
            s += 1.0 - expit(alpha + offsets(i));
        }
        s / rows as f64
    };

    let a2 = {
        let off = |i: usize| scores[i][0];
        bisect("R_X2", target_rate, |a| rate(&off, a))?
    };
    let r2: Vec<f64> = (0..rows)
        .map(|i| (uniforms[i][0] < expit(a2 + scores[i][0])) as u8 as f64)
        .collect();
    let a3 = {
        let chain = if dag.r_chain { params.r_chain } else { 0.0 };
        let off = |i: usize| scores[i][1] + chain * r2[i];
        bisect("R_X3", target_rate, |a| rate(&off, a))?
    };
    Ok([a2, a3])
}

fn bisect(indicator: &str, target: f64, rate: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    let r_lo = rate(lo);
    let r_hi = rate(hi);
    // rate decreases in alpha: r_lo is the largest reachable rate.
    if target > r_lo || target < r_hi {
        return Err(Error::Calibration {
            indicator: indicator.to_string(),
            target,
            lo: r_hi,
            hi: r_lo,
        });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
