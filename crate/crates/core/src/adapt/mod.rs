//! Covariate-shift adaptation: a domain classifier, density-ratio weights and
//! a weighted outcome model, all on imputed features plus indicators.

mod domain;
mod logistic;
mod outcome;

pub use domain::{
    fit_classifier_matrix, fit_domain_classifier, importance_weights, weights_from_logits, DomainClassifier,
    WeightOptions,
};
pub use logistic::{irls_logistic, IrlsOptions, LogisticFit};
pub use outcome::{fit_weighted_matrix, fit_weighted_outcome, predict_target, OutcomeKind, OutcomeModel};
