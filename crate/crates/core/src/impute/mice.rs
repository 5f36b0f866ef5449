//! Chained-equation imputers.
//!
//! Each sweep visits the incomplete columns in ascending order of missing
//! count (ties by column index) and regresses the column on all other
//! covariates over its observed rows. Neither the outcome nor the indicators
//! enter as predictors. Missing cells start at the observed column mean.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_no_fully_missing, observed_means, sweep_order, ImputeMethod, ImputedDataset, ImputerConfig};
use crate::adapt::{irls_logistic, IrlsOptions};
use crate::error::{Error, Result};
use crate::linalg::{fit_linear, LinearFit, RIDGE_FLOOR};
use crate::rng::SeedTree;
use crate::simgen::MaskedDataset;

/// Estimated shift between the missing and observed conditional means of
/// one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomIndicatorOffset {
    pub column: String,
    pub delta: f64,
    pub se: f64,
}

/// Weak ridge on the indicator model. Self-censored columns often separate
/// their indicator almost perfectly at low missingness rates.
const RI_INDICATOR_L2: f64 = 1.0;

#[derive(Clone, Copy, PartialEq)]
enum Fill {
    Norm,
    Pmm,
    Ri,
}

/// Fill with the conditional-mean prediction.
pub fn impute_mice_norm(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    chained(ds, cfg, seed, Fill::Norm)
}

/// Fill with an observed value from one of the `donors` rows whose predicted
/// mean is nearest.
pub fn impute_mice_pmm(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    chained(ds, cfg, seed, Fill::Pmm)
}

/// Conditional mean plus a per-column offset estimated from a logistic model
/// of the column's indicator. Under a logistic selection model with slope
/// `b` on the column and a normal conditional with variance `s2`, the
/// missing rows are shifted by `-b * s2` relative to the observed ones.
pub fn impute_mice_ri(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    chained(ds, cfg, seed, Fill::Ri)
}

fn chained(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64, fill: Fill) -> Result<ImputedDataset> {
    cfg.validate()?;
    check_no_fully_missing(ds)?;
    let (n, p) = (ds.n(), ds.p());
    let order = sweep_order(ds);
    let means = observed_means(ds);
    let mut cur = DMatrix::from_fn(n, p, |i, j| ds.get(i, j).unwrap_or(means[j]));
    let mut offsets: Vec<Option<(f64, f64)>> = vec![None; p];

    if fill == Fill::Pmm {
        for &j in &order {
            let observed = n - ds.missing_count(j);
            if observed < cfg.donors {
                return Err(Error::TooFewDonors {
                    column: ds.names()[j].clone(),
                    donors: cfg.donors,
                    observed,
                });
            }
        }
    }

    let tag = match fill {
        Fill::Norm => "mice_norm",
        Fill::Pmm => "mice_pmm",
        Fill::Ri => "mice_ri",
    };
    let root = SeedTree::new(seed).child(tag);
    for cycle in 0..cfg.cycles {
        for &j in &order {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let obs = ds.observed_rows(j);
            let miss = ds.missing_rows(j);
            let yobs: Vec<f64> = obs.iter().map(|&i| cur[(i, j)]).collect();
            let fit = fit_linear(&cur, &others, &obs, &yobs, RIDGE_FLOOR)?;
            let mut rng = root.index(cycle as u64).index(j as u64).rng();
            match fill {
                Fill::Norm => {
                    for &i in &miss {
                        cur[(i, j)] = fit.predict_row(&cur, i, &others);
                    }
                }
                Fill::Pmm => {
                    let pool = DonorPool::new(&fit, &cur, &obs, &others);
                    let draws: Vec<f64> = miss
                        .iter()
                        .map(|&i| {
                            let donors = pool.nearest(fit.predict_row(&cur, i, &others), cfg.donors);
                            let pick = donors[rng.random_range(0..donors.len())];
                            cur[(pick, j)]
                        })
                        .collect();
                    for (&i, v) in miss.iter().zip(draws) {
                        cur[(i, j)] = v;
                    }
                }
                Fill::Ri => {
                    let prev = offsets[j].map_or(0.0, |o| o.0);
                    let (delta, se) = estimate_offset(ds, &cur, j, &fit, &others, prev, &mut rng)?;
                    offsets[j] = Some((delta, se));
                    for &i in &miss {
                        cur[(i, j)] = fit.predict_row(&cur, i, &others) + delta;
                    }
                }
            }
        }
    }

    let method = match fill {
        Fill::Norm => ImputeMethod::MiceNorm,
        Fill::Pmm => ImputeMethod::MicePmm,
        Fill::Ri => ImputeMethod::MiceRi,
    };
    let mut out = ImputedDataset::from_masked(ds, cur, ImputerConfig { method, ..*cfg })?;
    out.diagnostics.ri_offsets = order
        .iter()
        .filter_map(|&j| {
            offsets[j].map(|(delta, se)| RandomIndicatorOffset {
                column: ds.names()[j].clone(),
                delta,
                se,
            })
        })
        .collect();
    Ok(out)
}

/// Fit the indicator of column `j` on all covariates, with the missing cells
/// of `j` drawn from their current predictive distribution.
fn estimate_offset<R: Rng + ?Sized>(
    ds: &MaskedDataset,
    cur: &DMatrix<f64>,
    j: usize,
    fit: &LinearFit,
    others: &[usize],
    prev_delta: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let sd = fit.sigma2.sqrt();
    let mut design = cur.clone();
    for i in ds.missing_rows(j) {
        let e: f64 = StandardNormal.sample(rng);
        design[(i, j)] = fit.predict_row(cur, i, others) + prev_delta + sd * e;
    }
    let r: Vec<f64> = (0..ds.n()).map(|i| ds.is_observed(i, j) as u8 as f64).collect();
    let opts = IrlsOptions {
        l2: RI_INDICATOR_L2,
        ..Default::default()
    };
    let logit = irls_logistic(&design, &r, None, &opts)?;
    Ok((-logit.coef[j] * fit.sigma2, logit.std_errors[j] * fit.sigma2))
}

/// Observed rows with their predicted means.
struct DonorPool {
    pred: Vec<(f64, usize)>,
}

impl DonorPool {
    fn new(fit: &LinearFit, cur: &DMatrix<f64>, obs: &[usize], others: &[usize]) -> Self {
        let pred = obs.iter().map(|&i| (fit.predict_row(cur, i, others), i)).collect();
        DonorPool { pred }
    }

    /// The `k` rows whose predicted means are closest to `target`, ordered by
    /// distance then row index.
    fn nearest(&self, target: f64, k: usize) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = self.pred.iter().map(|&(v, i)| ((v - target).abs(), i)).collect();
        let k = k.min(cand.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < cand.len() {
            cand.select_nth_unstable_by(k, cmp);
            cand.truncate(k);
        }
        cand.sort_by(cmp);
        cand.into_iter().map(|c| c.1).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::Domain;

    fn toy(n: usize, seed: u64, miss_every: usize) -> (MaskedDataset, DMatrix<f64>) {
        let mut rng = SeedTree::new(seed).rng();
        let full = DMatrix::from_fn(n, 3, |_, _| StandardNormal.sample(&mut rng));
        let full = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => full[(i, 0)],
            1 => 0.8 * full[(i, 0)] + 0.6 * full[(i, 1)],
            _ => -0.5 * full[(i, 0)] + full[(i, 2)],
        });
        let rows: Vec<Vec<Option<f64>>> = (0..n)
            .map(|i| {
                (0..3)
                    .map(|j| {
                        if j > 0 && (i + j) % miss_every == 0 {
                            None
                        } else {
                            Some(full[(i, j)])
                        }
                    })
                    .collect()
            })
            .collect();
        let names = vec!["a".into(), "b".into(), "c".into()];
        (MaskedDataset::from_cells(names, &rows, &[], None, Domain::Source).unwrap(), full)
    }

    #[test]
    fn donor_pool_orders_by_distance_then_row() {
        let pool = DonorPool {
            pred: vec![(0.0, 4), (1.0, 2), (1.0, 7), (3.0, 1), (5.0, 0)],
        };
        assert_eq!(pool.nearest(2.0, 3), vec![1, 2, 7]);
        assert_eq!(pool.nearest(-10.0, 2), vec![4, 2]);
        assert_eq!(pool.nearest(10.0, 9), vec![0, 1, 2, 7, 4]);
    }

    #[test]
    fn pmm_draws_observed_values() {
        let (ds, _) = toy(200, 1, 4);
        let out = impute_mice_pmm(&ds, &ImputerConfig::mice_pmm(), 3).unwrap();
        for j in 1..3 {
            let pool: Vec<f64> = ds.observed_rows(j).iter().map(|&i| ds.get(i, j).unwrap()).collect();
            for i in ds.missing_rows(j) {
                assert!(pool.contains(&out.values()[(i, j)]));
            }
        }
    }

    #[test]
    fn pmm_too_few_donors() {
        let rows = vec![
            vec![Some(1.0), Some(1.0)],
            vec![Some(2.0), None],
            vec![Some(3.0), Some(2.0)],
        ];
        let ds = MaskedDataset::from_cells(vec!["a".into(), "b".into()], &rows, &[], None, Domain::Source).unwrap();
        match impute_mice_pmm(&ds, &ImputerConfig::mice_pmm(), 0) {
            Err(Error::TooFewDonors { column, donors, observed }) => {
                assert_eq!((column.as_str(), donors, observed), ("b", 5, 2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn norm_beats_mean_on_correlated_data() {
        let (ds, full) = toy(500, 2, 3);
        let norm = impute_mice_norm(&ds, &ImputerConfig::mice_norm(), 0).unwrap();
        let mean = super::super::impute_mean(&ds).unwrap();
        let err = |m: &DMatrix<f64>| {
            let mut s = 0.0;
            for j in 1..3 {
                for i in ds.missing_rows(j) {
                    s += (m[(i, j)] - full[(i, j)]).powi(2);
                }
            }
            s
        };
        assert!(err(norm.values()) < 0.9 * err(mean.values()), "{} {}", err(norm.values()), err(mean.values()));
    }

    #[test]
    fn mice_deterministic_given_seed() {
        let (ds, _) = toy(150, 5, 5);
        for cfg in [ImputerConfig::mice_pmm(), ImputerConfig::mice_ri()] {
            let a = super::super::impute(&ds, &cfg, 11).unwrap();
            let b = super::super::impute(&ds, &cfg, 11).unwrap();
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn ri_reports_offsets() {
        let (ds, _) = toy(400, 6, 4);
        let out = impute_mice_ri(&ds, &ImputerConfig::mice_ri(), 1).unwrap();
        assert_eq!(out.diagnostics.ri_offsets.len(), 2);
        for o in &out.diagnostics.ri_offsets {
            assert!(o.se > 0.0 && o.delta.is_finite());
        }
    }
}
