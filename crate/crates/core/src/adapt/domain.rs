use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::logistic::{irls_logistic, IrlsOptions, LogisticFit};
use crate::error::{Error, Result};
use crate::impute::ImputedDataset;
use crate::numeric::{expit, quantile};

/// Logistic model of P(target | features), features = imputed covariates
/// followed by the missingness indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainClassifier {
    pub feature_names: Vec<String>,
    pub fit: LogisticFit,
    pub n_source: usize,
    pub n_target: usize,
}

/// Above this logit the target probability rounds to one in double precision.
const MAX_LOGIT: f64 = 36.7;

impl DomainClassifier {
    pub fn logits(&self, features: &DMatrix<f64>) -> Vec<f64> {
        (0..features.nrows()).map(|i| self.fit.logit_row(features, i)).collect()
    }

    pub fn target_probabilities(&self, features: &DMatrix<f64>) -> Vec<f64> {
        self.logits(features).into_iter().map(expit).collect()
    }
}

pub(crate) fn check_schema(expected: &[String], got: &[String], what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Schema(format!(
            "{what}: expected features [{}], got [{}]",
            expected.join(", "),
            got.join(", ")
        )));
    }
    Ok(())
}

/// Fit a source-vs-target classifier on raw feature matrices.
pub fn fit_classifier_matrix(
    feature_names: Vec<String>,
    source: &DMatrix<f64>,
    target: &DMatrix<f64>,
) -> Result<DomainClassifier> {
    if source.ncols() != target.ncols() || source.ncols() != feature_names.len() {
        return Err(Error::Schema("source and target feature matrices disagree".into()));
    }
    let (ns, nt) = (source.nrows(), target.nrows());
    if ns == 0 || nt == 0 {
        return Err(Error::Insufficient("both domains need at least one row".into()));
    }
    let x = DMatrix::from_fn(ns + nt, source.ncols(), |i, j| {
        if i < ns {
            source[(i, j)]
        } else {
            target[(i - ns, j)]
        }
    });
    let y: Vec<f64> = (0..ns + nt).map(|i| (i >= ns) as u8 as f64).collect();
    let fit = irls_logistic(&x, &y, None, &IrlsOptions::default())?;
    Ok(DomainClassifier {
        feature_names,
        fit,
        n_source: ns,
        n_target: nt,
    })
}

pub fn fit_domain_classifier(source: &ImputedDataset, target: &ImputedDataset) -> Result<DomainClassifier> {
    let names = source.feature_names();
    check_schema(&names, &target.feature_names(), "target schema")?;
    fit_classifier_matrix(names, &source.features(), &target.features())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    /// Cap weights at this quantile of the source weights (e.g. 0.995).
    pub clip_quantile: Option<f64>,
}

/// Density-ratio weights `p / (1 - p)` of the source rows, computed on the
/// logit scale.
pub fn weights_from_logits(logits: &[f64], opts: &WeightOptions) -> Result<Vec<f64>> {
    match opts.clip_quantile {
        None => {
            if let Some(row) = logits.iter().position(|&e| e > MAX_LOGIT) {
                return Err(Error::NumericallyOne { row });
            }
            Ok(logits.iter().map(|e| e.exp()).collect())
        }
        Some(q) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Config(format!("clip quantile must be in (0, 1], got {q}")));
            }
            let capped: Vec<f64> = logits.iter().map(|e| e.min(MAX_LOGIT)).collect();
            let cap = quantile(&capped, q);
            Ok(capped.iter().map(|e| e.min(cap).exp()).collect())
        }
    }
}

pub fn importance_weights(clf: &DomainClassifier, source: &ImputedDataset, opts: &WeightOptions) -> Result<Vec<f64>> {
    check_schema(&clf.feature_names, &source.feature_names(), "source schema")?;
    weights_from_logits(&clf.logits(&source.features()), opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_odds() {
        let w = weights_from_logits(&[0.0, 2.0_f64.ln(), -1.0], &WeightOptions::default()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert!((w[1] - 2.0).abs() < 1e-12);
        let p = expit(-1.0);
        assert!((w[2] - p / (1.0 - p)).abs() < 1e-12);
    }

    #[test]
    fn saturated_probability_flagged_or_clipped() {
        assert!(matches!(
            weights_from_logits(&[0.0, 40.0], &WeightOptions::default()),
            Err(Error::NumericallyOne { row: 1 })
        ));
        let w = weights_from_logits(
            &[0.0, 1.0, 2.0, 40.0],
            &WeightOptions {
                clip_quantile: Some(0.5),
            },
        )
        .unwrap();
        assert!(w.iter().all(|v| v.is_finite()));
        assert!((w[3] - w[2]).abs() < 1e-12);
    }

    #[test]
    fn classifier_recovers_mean_shift() {
        use crate::rng::SeedTree;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = SeedTree::new(1).rng();
        let s = DMatrix::from_fn(4000, 1, |_, _| StandardNormal.sample(&mut rng));
        let t = DMatrix::from_fn(4000, 1, |_, _| 1.0 + Distribution::<f64>::sample(&StandardNormal, &mut rng));
        let clf = fit_classifier_matrix(vec!["x".into()], &s, &t).unwrap();
        // log density ratio of N(1,1) to N(0,1) is x - 1/2
        assert!((clf.fit.coef[0] - 1.0).abs() < 0.1);
        assert!((clf.fit.intercept + 0.5).abs() < 0.1);
    }
}
