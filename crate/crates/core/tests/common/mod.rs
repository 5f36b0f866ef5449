//! Checks shared by the property suites and the acceptance runner. Each
//! returns `Err` with a description on the first violation.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use shiftlab::adapt::{fit_weighted_matrix, irls_logistic, IrlsOptions, OutcomeKind};
use shiftlab::harness::{run_in_memory, FactorialConfig, ImputerOverrides, Method};
use shiftlab::impute::{impute, run_gibbs, BayesVariant, ImputerConfig};
use shiftlab::metrics::{auroc, brier, rmse};
use shiftlab::rng::SeedTree;
use shiftlab::simgen::{Domain, MaskedDataset};

pub type Check = std::result::Result<(), String>;

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Correlated Gaussian covariates with random NA cells; every column keeps
/// at least `min_observed` values and column 0 is complete.
pub fn random_masked(seed: u64, n: usize, p: usize, miss: f64, min_observed: usize) -> MaskedDataset {
    let mut rng = SeedTree::new(seed).rng();
    let mut rows: Vec<Vec<Option<f64>>> = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let base = normal(&mut rng);
        let row: Vec<f64> = (0..p).map(|j| 0.6 * base + normal(&mut rng) + j as f64).collect();
        y.push(row.iter().sum::<f64>() + normal(&mut rng));
        rows.push(
            row.iter()
                .enumerate()
                .map(|(j, &v)| if j > 0 && rng.random::<f64>() < miss { None } else { Some(v) })
                .collect(),
        );
    }
    for j in 1..p {
        let mut k = 0;
        while rows.iter().filter(|r| r[j].is_some()).count() < min_observed {
            if rows[k][j].is_none() {
                rows[k][j] = Some(j as f64 + normal(&mut rng));
            }
            k += 1;
        }
    }
    let names = (0..p).map(|j| format!("V{j}")).collect();
    MaskedDataset::from_cells(names, &rows, &[], Some(y), Domain::Source).expect("valid dataset")
}

pub fn quick_imputers() -> Vec<ImputerConfig> {
    let mut out = vec![
        ImputerConfig::mean(),
        ImputerConfig::mice_norm(),
        ImputerConfig::mice_pmm(),
        ImputerConfig::mice_ri(),
    ];
    for v in [
        BayesVariant::ZModel,
        BayesVariant::Joint,
        BayesVariant::NoOutcome,
        BayesVariant::NoMissingness,
    ] {
        let mut c = ImputerConfig::bayes(v, false);
        c.cycles = 3;
        c.mcmc.iterations = 60;
        c.mcmc.burn_in = 20;
        out.push(c);
    }
    for c in out.iter_mut() {
        c.cycles = 3;
    }
    out
}

/// Observed cells unchanged, every cell finite, pattern carried through.
pub fn check_mask_preservation(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Check {
    let out = impute(ds, cfg, seed).map_err(|e| format!("{}: {e}", cfg.label()))?;
    if out.observed_pattern() != ds.observed_pattern() {
        return Err(format!("{}: observation pattern changed", cfg.label()));
    }
    for i in 0..ds.n() {
        for j in 0..ds.p() {
            let v = out.values()[(i, j)];
            if !v.is_finite() {
                return Err(format!("{}: non-finite value at ({i}, {j})", cfg.label()));
            }
            if let Some(x) = ds.get(i, j) {
                if v.to_bits() != x.to_bits() {
                    return Err(format!("{}: observed cell ({i}, {j}) changed {x} -> {v}", cfg.label()));
                }
            }
        }
    }
    Ok(())
}

/// Every PMM fill is one of the column's observed values.
pub fn check_pmm_closure(ds: &MaskedDataset, seed: u64) -> Check {
    let mut cfg = ImputerConfig::mice_pmm();
    cfg.cycles = 3;
    let out = impute(ds, &cfg, seed).map_err(|e| e.to_string())?;
    for j in 0..ds.p() {
        let pool: Vec<u64> = ds.observed_rows(j).iter().map(|&i| ds.get(i, j).unwrap().to_bits()).collect();
        for i in ds.missing_rows(j) {
            if !pool.contains(&out.values()[(i, j)].to_bits()) {
                return Err(format!("cell ({i}, {j}) filled with a value not observed in its column"));
            }
        }
    }
    Ok(())
}

/// Random one-covariate logistic problem without separation.
pub fn random_logistic_problem(seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = SeedTree::new(seed).rng();
    let n = rng.random_range(40..120);
    let a = rng.random_range(-1.0..1.0);
    let b = rng.random_range(-1.5..1.5);
    loop {
        let x = DMatrix::from_fn(n, 1, |_, _| normal(&mut rng));
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let p = 1.0 / (1.0 + (-(a + b * x[(i, 0)])).exp());
                (rng.random::<f64>() < p) as u8 as f64
            })
            .collect();
        // overlap on both sides guarantees a finite maximizer
        let max0 = (0..n).filter(|&i| y[i] == 0.0).map(|i| x[(i, 0)]).fold(f64::MIN, f64::max);
        let min1 = (0..n).filter(|&i| y[i] == 1.0).map(|i| x[(i, 0)]).fold(f64::MAX, f64::min);
        let max1 = (0..n).filter(|&i| y[i] == 1.0).map(|i| x[(i, 0)]).fold(f64::MIN, f64::max);
        let min0 = (0..n).filter(|&i| y[i] == 0.0).map(|i| x[(i, 0)]).fold(f64::MAX, f64::min);
        if max0 > min1 && max1 > min0 {
            return (x, y);
        }
    }
}

fn logistic_loglik(x: &DMatrix<f64>, y: &[f64], a: f64, b: f64) -> f64 {
    (0..y.len())
        .map(|i| {
            let e = a + b * x[(i, 0)];
            let l = if e > 0.0 { e + (-e).exp().ln_1p() } else { e.exp().ln_1p() };
            y[i] * e - l
        })
        .sum()
}

/// Coarse grid followed by compass search down to a 1e-10 step.
pub fn grid_logistic_mle(x: &DMatrix<f64>, y: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for ia in -40..=40 {
        for ib in -40..=40 {
            let (a, b) = (ia as f64 * 0.1, ib as f64 * 0.1);
            let v = logistic_loglik(x, y, a, b);
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    let (mut a, mut b, mut h) = (best.1, best.2, 0.05);
    while h > 1e-10 {
        let mut moved = false;
        for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h), (h, -h), (-h, h)] {
            let v = logistic_loglik(x, y, a + da, b + db);
            if v > best.0 {
                best = (v, a + da, b + db);
                a += da;
                b += db;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    (a, b)
}

pub fn check_irls_vs_grid(seed: u64, tol: f64) -> Check {
    let (x, y) = random_logistic_problem(seed);
    let fit = irls_logistic(&x, &y, None, &IrlsOptions::default()).map_err(|e| e.to_string())?;
    let (a, b) = grid_logistic_mle(&x, &y);
    let gap = (fit.intercept - a).abs().max((fit.coef[0] - b).abs());
    if gap > tol {
        return Err(format!("seed {seed}: IRLS ({}, {}) vs grid ({a}, {b})", fit.intercept, fit.coef[0]));
    }
    if logistic_loglik(&x, &y, fit.intercept, fit.coef[0]) < logistic_loglik(&x, &y, a, b) - 1e-9 {
        return Err(format!("seed {seed}: grid point has higher likelihood than IRLS"));
    }
    Ok(())
}

/// The outcome equation of a Gibbs run on complete data against the
/// closed-form normal-inverse-gamma posterior mean `(I/s^2 + X'X)^-1 X'y`.
pub fn check_conjugate_oracle(seed: u64, tol: f64) -> Check {
    let mut rng = SeedTree::new(seed).rng();
    let n = 300;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let a = normal(&mut rng);
        let b = 0.7 * a + 0.5 * normal(&mut rng);
        y.push(1.0 + a - b + 0.3 * normal(&mut rng));
        rows.push(vec![Some(a), Some(b)]);
    }
    let ds = MaskedDataset::from_cells(vec!["a".into(), "b".into()], &rows, &[], Some(y.clone()), Domain::Source)
        .map_err(|e| e.to_string())?;
    let mut cfg = ImputerConfig::bayes(BayesVariant::Joint, false);
    cfg.mcmc.iterations = 4000;
    cfg.mcmc.burn_in = 500;
    let run = run_gibbs(&ds, &cfg, seed).map_err(|e| e.to_string())?;
    let eq = run
        .equations
        .iter()
        .find(|e| e.response == "Y")
        .ok_or("no outcome equation")?;
    let (ym, ys) = run.outcome_scaling.ok_or("no outcome scaling")?;
    let x = DMatrix::from_fn(n, 3, |i, j| {
        if j == 0 {
            1.0
        } else {
            let (m, s) = run.covariate_scaling[j - 1];
            (rows[i][j - 1].unwrap() - m) / s
        }
    });
    let yv = DVector::from_fn(n, |i, _| (y[i] - ym) / ys);
    let prec = DMatrix::<f64>::identity(3, 3) / cfg.mcmc.prior_sd.powi(2) + x.transpose() * &x;
    let mean = prec.lu().solve(&(x.transpose() * yv)).ok_or("singular normal equations")?;
    for k in 0..3 {
        if (eq.coef_mean[k] - mean[k]).abs() > tol {
            return Err(format!("coefficient {k}: chain {} vs closed form {}", eq.coef_mean[k], mean[k]));
        }
    }
    Ok(())
}

/// Multiplying every weight by a constant leaves the weighted fit unchanged.
pub fn check_weight_scale_invariance(seed: u64) -> Check {
    let mut rng = SeedTree::new(seed).rng();
    let n = rng.random_range(30..80);
    let x = DMatrix::from_fn(n, 2, |_, _| normal(&mut rng));
    let y: Vec<f64> = (0..n).map(|i| 0.5 + x[(i, 0)] - 2.0 * x[(i, 1)] + normal(&mut rng)).collect();
    let yb: Vec<f64> = (0..n)
        .map(|i| (0.3 * x[(i, 0)] + 1.5 * normal(&mut rng) > 0.0) as u8 as f64)
        .collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
    let c = rng.random_range(0.01..100.0);
    let wc: Vec<f64> = w.iter().map(|v| v * c).collect();
    let names = vec!["a".to_string(), "b".to_string()];
    for (kind, resp) in [(OutcomeKind::Linear, &y), (OutcomeKind::Logistic, &yb)] {
        let f1 = fit_weighted_matrix(names.clone(), &x, resp, Some(&w), kind).map_err(|e| e.to_string())?;
        let f2 = fit_weighted_matrix(names.clone(), &x, resp, Some(&wc), kind).map_err(|e| e.to_string())?;
        let gap = f1
            .coef
            .iter()
            .zip(&f2.coef)
            .map(|(a, b)| (a - b).abs())
            .fold((f1.intercept - f2.intercept).abs(), f64::max);
        if gap > 1e-8 {
            return Err(format!("{kind:?}: scaling weights by {c} moved the fit by {gap}"));
        }
    }
    Ok(())
}

pub fn tiny_factorial(seed: u64) -> FactorialConfig {
    FactorialConfig {
        sample_sizes: vec![300],
        target_props: vec![0.5],
        miss_pcts: vec![0.1, 0.25],
        dags: vec![1, 6],
        nonlinearity: vec![1, 3],
        imputer: ImputerOverrides {
            iterations: Some(80),
            burn_in: Some(20),
            cycles: Some(3),
            ..Default::default()
        },
        ..FactorialConfig::full_design(seed, 1, vec![Method::Mean, Method::MicePmm, Method::ZModel, Method::Oracle])
    }
}

/// Serial and parallel runs produce identical sorted rows.
pub fn check_scheduling_independence(cfg: &FactorialConfig) -> Check {
    let a = run_in_memory(cfg, 1).map_err(|e| e.to_string())?;
    let b = run_in_memory(cfg, 4).map_err(|e| e.to_string())?;
    let ja: Vec<String> = a.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    let jb: Vec<String> = b.iter().map(|r| serde_json::to_string(r).unwrap()).collect();
    if ja != jb {
        return Err("serial and parallel rows differ".into());
    }
    if a.is_empty() {
        return Err("no rows".into());
    }
    Ok(())
}

/// Probability that a random positive outscores a random negative, by
/// counting every pair.
pub fn pairwise_auroc(scores: &[f64], labels: &[f64]) -> Option<f64> {
    let (mut num, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| num / pairs)
}

pub fn check_metric_oracles(seed: u64) -> Check {
    let mut rng = SeedTree::new(seed).rng();
    let n = rng.random_range(2..60);
    // coarse scores so that ties occur
    let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 8.0).floor() / 8.0).collect();
    let labels: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() < 0.4) as u8 as f64).collect();
    let got = auroc(&scores, &labels).map_err(|e| e.to_string())?;
    match (got, pairwise_auroc(&scores, &labels)) {
        (Some(a), Some(b)) if (a - b).abs() <= 1e-12 => {}
        (None, None) => {}
        (a, b) => return Err(format!("AUROC {a:?} vs pair count {b:?}")),
    }
    let mut s = 0.0;
    for i in 0..n {
        s += (scores[i] - labels[i]) * (scores[i] - labels[i]);
    }
    let naive_brier = s / n as f64;
    let b = brier(&scores, &labels).map_err(|e| e.to_string())?;
    if (b - naive_brier).abs() > 1e-12 {
        return Err(format!("Brier {b} vs {naive_brier}"));
    }
    let pred: Vec<f64> = (0..n).map(|_| normal(&mut rng) * 3.0).collect();
    let truth: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let mut s = 0.0;
    for i in 0..n {
        s += (pred[i] - truth[i]).powi(2);
    }
    let naive_rmse = (s / n as f64).sqrt();
    let r = rmse(&pred, &truth).map_err(|e| e.to_string())?;
    if (r - naive_rmse).abs() > 1e-12 {
        return Err(format!("RMSE {r} vs {naive_rmse}"));
    }
    Ok(())
}
