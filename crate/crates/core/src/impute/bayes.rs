//! Gibbs sampler for a linear-Gaussian network over covariates, missingness
//! indicators and (optionally) the outcome.
//!
//! All continuous nodes are standardized with their observed moments. The
//! network is a chain: fully observed covariates first, then incomplete ones
//! by ascending missing count. Each incomplete covariate is regressed on all
//! covariates before it. Each indicator of an incomplete column is a probit
//! regression on every covariate (including its own column) and the
//! indicators before it; the latent utility is sampled by data augmentation.
//! With the outcome in the model, Y is regressed on all covariates and
//! indicators. The z-model variant adds one standard-normal latent factor per
//! row that enters every covariate equation, and then models every covariate,
//! observed or not.
//!
//! Coefficients get a normal prior centred at zero; Gaussian equations use a
//! normal-inverse-gamma prior, probit equations unit noise. Imputations are
//! posterior means of the missing cells after burn-in.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::conjugate::{posterior_from_moments, NoiseModel};
use super::truncnorm::{sample_truncated_above, sample_truncated_below};
use super::{check_no_fully_missing, BayesVariant, ImputeMethod, ImputedDataset, ImputerConfig};
use crate::error::{Error, Result};
use crate::rng::SeedTree;
use crate::simgen::{Domain, MaskedDataset};

const NOISE_SHAPE: f64 = 1.0;
const NOISE_SCALE: f64 = 1.0;

/// Posterior summary of one equation, on the standardized scale. The first
/// coefficient is the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationSummary {
    pub response: String,
    pub predictors: Vec<String>,
    pub probit: bool,
    pub coef_mean: Vec<f64>,
    pub coef_sd: Vec<f64>,
    pub sigma2_mean: f64,
}

#[derive(Debug, Clone)]
pub struct GibbsRun {
    pub imputed: ImputedDataset,
    pub equations: Vec<EquationSummary>,
    /// Observed mean and scale used to standardize each covariate.
    pub covariate_scaling: Vec<(f64, f64)>,
    /// Mean and scale of the outcome, when it is modelled.
    pub outcome_scaling: Option<(f64, f64)>,
    pub kept_draws: usize,
}

pub fn impute_bayes(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    Ok(run_gibbs(ds, cfg, seed)?.imputed)
}

struct Equation {
    name: String,
    response: usize,
    predictors: Vec<usize>,
    probit: bool,
    beta: DVector<f64>,
    sigma2: f64,
    sum_beta: DVector<f64>,
    sum_beta2: DVector<f64>,
    sum_sigma2: f64,
}

impl Equation {
    fn new(name: String, response: usize, predictors: Vec<usize>, probit: bool) -> Self {
        let k = predictors.len() + 1;
        Equation {
            name,
            response,
            predictors,
            probit,
            beta: DVector::zeros(k),
            sigma2: 1.0,
            sum_beta: DVector::zeros(k),
            sum_beta2: DVector::zeros(k),
            sum_sigma2: 0.0,
        }
    }

    fn predict(&self, s: &DMatrix<f64>, i: usize) -> f64 {
        self.beta[0]
            + self
                .predictors
                .iter()
                .enumerate()
                .map(|(k, &c)| self.beta[k + 1] * s[(i, c)])
                .sum::<f64>()
    }
}

pub fn run_gibbs(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<GibbsRun> {
    cfg.validate()?;
    if cfg.method != ImputeMethod::Bayes {
        return Err(Error::Config("run_gibbs needs a bayes imputer configuration".into()));
    }
    check_no_fully_missing(ds)?;
    let (n, p) = (ds.n(), ds.p());
    if n < 2 {
        return Err(Error::Insufficient("Gibbs sampler needs at least two rows".into()));
    }
    let variant = cfg.bayes_variant;
    let wants_outcome = matches!(variant, BayesVariant::ZModel | BayesVariant::Joint);
    if wants_outcome && cfg.leak && ds.domain() == Domain::Target && ds.outcome().is_none() {
        return Err(Error::Config("leak imputation of the target needs the target outcome".into()));
    }
    let use_outcome = cfg.reads_outcome(ds.domain()) && ds.outcome().is_some();
    let model_r = variant != BayesVariant::NoMissingness;
    let use_z = variant == BayesVariant::ZModel;

    // chain order
    let incomplete = super::sweep_order(ds);
    let mut chain: Vec<usize> = (0..p).filter(|j| !incomplete.contains(j)).collect();
    chain.extend(&incomplete);

    // state layout
    let mut names: Vec<String> = ds.names().to_vec();
    let mut next = p;
    let ind_col: Vec<usize> = if model_r {
        incomplete
            .iter()
            .map(|&j| {
                names.push(format!("R_{}", ds.names()[j]));
                next += 1;
                next - 1
            })
            .collect()
    } else {
        Vec::new()
    };
    let y_col = use_outcome.then(|| {
        names.push("Y".into());
        next += 1;
        next - 1
    });
    let z_col = use_z.then(|| {
        names.push("Z".into());
        next += 1;
        next - 1
    });
    let u_col: Vec<usize> = ind_col
        .iter()
        .map(|&c| {
            let label = format!("U_{}", names[c]);
            names.push(label);
            next += 1;
            next - 1
        })
        .collect();
    let m = next;

    // standardization
    let scaling: Vec<(f64, f64)> = (0..p)
        .map(|j| {
            let vals: Vec<f64> = ds.observed_rows(j).iter().map(|&i| ds.raw_values()[(i, j)]).collect();
            moments(&vals)
        })
        .collect();
    let outcome_scaling = y_col.map(|_| moments(ds.outcome().expect("checked above")));

    let mut rng = SeedTree::new(seed).child("gibbs").rng();
    let mut s = DMatrix::<f64>::zeros(n, m);
    for j in 0..p {
        let (mu, sc) = scaling[j];
        for i in 0..n {
            s[(i, j)] = ds.get(i, j).map_or(0.0, |v| (v - mu) / sc);
        }
    }
    for (k, &j) in incomplete.iter().enumerate().take(ind_col.len()) {
        for i in 0..n {
            let r = ds.is_observed(i, j);
            s[(i, ind_col[k])] = r as u8 as f64;
            s[(i, u_col[k])] = if r {
                sample_truncated_below(0.0, 1.0, 0.0, &mut rng)
            } else {
                sample_truncated_above(0.0, 1.0, 0.0, &mut rng)
            };
        }
    }
    if let (Some(c), Some((mu, sc))) = (y_col, outcome_scaling) {
        let y = ds.outcome().expect("checked above");
        for i in 0..n {
            s[(i, c)] = (y[i] - mu) / sc;
        }
    }
    if let Some(c) = z_col {
        for i in 0..n {
            s[(i, c)] = StandardNormal.sample(&mut rng);
        }
    }

    // equations
    let mut eqs: Vec<Equation> = Vec::new();
    for (pos, &j) in chain.iter().enumerate() {
        if !use_z && !incomplete.contains(&j) {
            continue;
        }
        let mut preds: Vec<usize> = chain[..pos].to_vec();
        preds.extend(z_col);
        eqs.push(Equation::new(names[j].clone(), j, preds, false));
    }
    for k in 0..ind_col.len() {
        let mut preds: Vec<usize> = chain.clone();
        preds.extend(&ind_col[..k]);
        eqs.push(Equation::new(names[ind_col[k]].clone(), u_col[k], preds, true));
    }
    if let Some(c) = y_col {
        let mut preds = chain.clone();
        preds.extend(&ind_col);
        eqs.push(Equation::new("Y".into(), c, preds, false));
    }

    // where each node appears as a predictor, and which equation it answers
    let mut appears: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m];
    let mut own: Vec<Option<usize>> = vec![None; m];
    for (e, eq) in eqs.iter().enumerate() {
        own[eq.response] = Some(e);
        for (k, &c) in eq.predictors.iter().enumerate() {
            appears[c].push((e, k + 1));
        }
    }
    let missing: Vec<(usize, Vec<usize>)> = incomplete.iter().map(|&j| (j, ds.missing_rows(j))).collect();

    let mut sums = DMatrix::<f64>::zeros(n, p);
    let burn_in = cfg.mcmc.burn_in;
    let kept = cfg.mcmc.iterations - burn_in;
    for iter in 0..cfg.mcmc.iterations {
        for eq in eqs.iter_mut() {
            draw_equation(eq, &s, cfg.mcmc.prior_sd, &mut rng).map_err(|what| Error::Sampler { iteration: iter, what })?;
        }
        for k in 0..ind_col.len() {
            let eq = &eqs[own[u_col[k]].expect("indicator has an equation")];
            for i in 0..n {
                let mean = eq.predict(&s, i);
                s[(i, u_col[k])] = if s[(i, ind_col[k])] > 0.5 {
                    sample_truncated_below(mean, 1.0, 0.0, &mut rng)
                } else {
                    sample_truncated_above(mean, 1.0, 0.0, &mut rng)
                };
            }
        }
        if let Some(c) = z_col {
            for i in 0..n {
                s[(i, c)] = draw_node(&s, i, c, own[c], &appears[c], &eqs, &mut rng);
            }
        }
        for (j, rows) in &missing {
            for &i in rows {
                s[(i, *j)] = draw_node(&s, i, *j, own[*j], &appears[*j], &eqs, &mut rng);
            }
        }
        for (j, rows) in &missing {
            if let Some(&i) = rows.iter().find(|&&i| !s[(i, *j)].is_finite()) {
                return Err(Error::Sampler {
                    iteration: iter,
                    what: format!("non-finite draw for `{}` row {i}", names[*j]),
                });
            }
        }
        if iter >= burn_in {
            for (j, rows) in &missing {
                for &i in rows {
                    sums[(i, *j)] += s[(i, *j)];
                }
            }
            for eq in eqs.iter_mut() {
                eq.sum_beta += &eq.beta;
                eq.sum_beta2 += eq.beta.component_mul(&eq.beta);
                eq.sum_sigma2 += eq.sigma2;
            }
        }
    }

    let filled = DMatrix::from_fn(n, p, |i, j| {
        let (mu, sc) = scaling[j];
        mu + sc * sums[(i, j)] / kept as f64
    });
    let imputed = ImputedDataset::from_masked(ds, filled, *cfg)?;
    let kf = kept as f64;
    let equations = eqs
        .iter()
        .map(|eq| {
            let mean = &eq.sum_beta / kf;
            let var = (&eq.sum_beta2 / kf - mean.component_mul(&mean)).map(|v| v.max(0.0));
            EquationSummary {
                response: eq.name.clone(),
                predictors: eq.predictors.iter().map(|&c| names[c].clone()).collect(),
                probit: eq.probit,
                coef_mean: mean.iter().copied().collect(),
                coef_sd: var.iter().map(|v| v.sqrt()).collect(),
                sigma2_mean: eq.sum_sigma2 / kf,
            }
        })
        .collect();
    Ok(GibbsRun {
        imputed,
        equations,
        covariate_scaling: scaling,
        outcome_scaling,
        kept_draws: kept,
    })
}

fn moments(v: &[f64]) -> (f64, f64) {
    let n = v.len().max(1) as f64;
    let mu = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n).sqrt();
    (mu, if sd > 1e-12 { sd } else { 1.0 })
}

fn draw_equation<R: Rng + ?Sized>(
    eq: &mut Equation,
    s: &DMatrix<f64>,
    prior_sd: f64,
    rng: &mut R,
) -> std::result::Result<(), String> {
    let k = eq.predictors.len() + 1;
    let mut xtx = DMatrix::<f64>::zeros(k, k);
    let mut xty = DVector::<f64>::zeros(k);
    let mut yty = 0.0;
    let mut row = vec![1.0; k];
    for i in 0..s.nrows() {
        for (a, &c) in eq.predictors.iter().enumerate() {
            row[a + 1] = s[(i, c)];
        }
        let y = s[(i, eq.response)];
        for a in 0..k {
            xty[a] += row[a] * y;
            for b in a..k {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
        yty += y * y;
    }
    for a in 0..k {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }
    let noise = if eq.probit {
        NoiseModel::Known(1.0)
    } else {
        NoiseModel::InverseGamma {
            shape: NOISE_SHAPE,
            scale: NOISE_SCALE,
        }
    };
    let post = posterior_from_moments(&xtx, &xty, yty, s.nrows(), &DVector::zeros(k), prior_sd, noise)
        .map_err(|e| format!("equation for `{}`: {e}", eq.name))?;
    let (beta, sigma2) = post.sample(rng);
    if !beta.iter().all(|b| b.is_finite()) || !sigma2.is_finite() {
        return Err(format!("non-finite parameters for `{}`", eq.name));
    }
    eq.beta = beta;
    eq.sigma2 = sigma2;
    Ok(())
}

/// Draw node `c` at row `i` from its Gaussian full conditional.
fn draw_node<R: Rng + ?Sized>(
    s: &DMatrix<f64>,
    i: usize,
    c: usize,
    own: Option<usize>,
    appears: &[(usize, usize)],
    eqs: &[Equation],
    rng: &mut R,
) -> f64 {
    let (mut prec, mut lin) = match own {
        Some(e) => {
            let eq = &eqs[e];
            (1.0 / eq.sigma2, eq.predict(s, i) / eq.sigma2)
        }
        None => (1.0, 0.0),
    };
    let v = s[(i, c)];
    for &(e, k) in appears {
        let eq = &eqs[e];
        let b = eq.beta[k];
        let rest = s[(i, eq.response)] - (eq.predict(s, i) - b * v);
        prec += b * b / eq.sigma2;
        lin += b * rest / eq.sigma2;
    }
    let z: f64 = StandardNormal.sample(rng);
    lin / prec + z / prec.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impute::conjugate_posterior;

    fn small(n: usize, seed: u64, with_na: bool) -> MaskedDataset {
        let mut rng = SeedTree::new(seed).rng();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let e: f64 = StandardNormal.sample(&mut rng);
            let b = 0.7 * a + 0.5 * e;
            let e2: f64 = StandardNormal.sample(&mut rng);
            y.push(1.0 + a - b + 0.3 * e2);
            let b_cell = if with_na && i % 4 == 0 { None } else { Some(b) };
            rows.push(vec![Some(a), b_cell]);
        }
        MaskedDataset::from_cells(vec!["a".into(), "b".into()], &rows, &[1], Some(y), Domain::Source).unwrap()
    }

    fn quick(variant: BayesVariant, leak: bool) -> ImputerConfig {
        let mut c = ImputerConfig::bayes(variant, leak);
        c.mcmc.iterations = 300;
        c.mcmc.burn_in = 100;
        c
    }

    #[test]
    fn observed_cells_preserved() {
        let ds = small(120, 1, true);
        for v in [BayesVariant::ZModel, BayesVariant::Joint, BayesVariant::NoOutcome, BayesVariant::NoMissingness] {
            let out = impute_bayes(&ds, &quick(v, true), 2).unwrap();
            for i in 0..ds.n() {
                for j in 0..2 {
                    if let Some(x) = ds.get(i, j) {
                        assert_eq!(out.values()[(i, j)].to_bits(), x.to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn equation_structure() {
        let ds = small(80, 3, true);
        let run = run_gibbs(&ds, &quick(BayesVariant::Joint, true), 1).unwrap();
        let resp: Vec<&str> = run.equations.iter().map(|e| e.response.as_str()).collect();
        assert_eq!(resp, vec!["b", "R_b", "Y"]);
        assert_eq!(run.equations[1].predictors, vec!["a", "b"]);
        assert_eq!(run.equations[2].predictors, vec!["a", "b", "R_b"]);
        let run = run_gibbs(&ds, &quick(BayesVariant::ZModel, true), 1).unwrap();
        let resp: Vec<&str> = run.equations.iter().map(|e| e.response.as_str()).collect();
        assert_eq!(resp, vec!["a", "b", "R_b", "Y"]);
        assert_eq!(run.equations[1].predictors, vec!["a", "Z"]);
        let run = run_gibbs(&ds, &quick(BayesVariant::NoMissingness, true), 1).unwrap();
        assert_eq!(run.equations.len(), 1);
    }

    #[test]
    fn no_leak_target_ignores_outcome() {
        let ds = small(100, 4, true).with_domain(Domain::Target);
        let cfg = quick(BayesVariant::Joint, false);
        let a = impute_bayes(&ds, &cfg, 7).unwrap();
        let b = impute_bayes(&ds.without_outcome(), &cfg, 7).unwrap();
        assert_eq!(a.values(), b.values());
        let y2: Vec<f64> = ds.outcome().unwrap().iter().map(|v| v * 5.0 - 3.0).collect();
        let c = impute_bayes(&ds.with_outcome(y2).unwrap(), &cfg, 7).unwrap();
        assert_eq!(a.values(), c.values());
    }

    #[test]
    fn leak_target_without_outcome_is_error() {
        let ds = small(50, 4, true).with_domain(Domain::Target).without_outcome();
        assert!(matches!(impute_bayes(&ds, &quick(BayesVariant::Joint, true), 1), Err(Error::Config(_))));
    }

    #[test]
    fn outcome_model_matches_closed_form() {
        let ds = small(300, 5, false);
        let mut cfg = ImputerConfig::bayes(BayesVariant::Joint, true);
        cfg.mcmc.iterations = 4000;
        cfg.mcmc.burn_in = 500;
        let run = run_gibbs(&ds, &cfg, 3).unwrap();
        let eq = run.equations.iter().find(|e| e.response == "Y").unwrap();
        let (ym, ys) = run.outcome_scaling.unwrap();
        let n = ds.n();
        let x = DMatrix::from_fn(n, 3, |i, j| {
            if j == 0 {
                1.0
            } else {
                let (m, s) = run.covariate_scaling[j - 1];
                (ds.get(i, j - 1).unwrap() - m) / s
            }
        });
        let y = DVector::from_fn(n, |i, _| (ds.outcome().unwrap()[i] - ym) / ys);
        let post = conjugate_posterior(
            &x,
            &y,
            &DVector::zeros(3),
            cfg.mcmc.prior_sd,
            NoiseModel::InverseGamma { shape: 1.0, scale: 1.0 },
        )
        .unwrap();
        for k in 0..3 {
            assert!((eq.coef_mean[k] - post.mean[k]).abs() < 0.01, "{k}: {} vs {}", eq.coef_mean[k], post.mean[k]);
        }
    }
}
