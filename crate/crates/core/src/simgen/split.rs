use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dag::DagSpec;
use super::generate::{calibrate_missingness_intercept, generate_with, CompleteDataset};
use super::mask::{apply_mask, Domain, MaskedDataset};
use super::params::{redraw_missingness, sample_params, StructuralParams};
use crate::error::{Error, Result};
use crate::rng::SeedTree;

/// Source and target structural parameters. The outcome mechanism must be
/// shared; missingness (and optionally covariate) parameters may differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConfig {
    pub dag: DagSpec,
    pub source: StructuralParams,
    pub target: StructuralParams,
}

impl ShiftConfig {
    pub fn new(dag: DagSpec, source: StructuralParams, target: StructuralParams) -> Result<Self> {
        let cfg = ShiftConfig { dag, source, target };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn no_shift(dag: DagSpec, params: StructuralParams) -> Result<Self> {
        Self::new(dag, params.clone(), params)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate(&self.dag)?;
        self.target.validate(&self.dag)?;
        if !self.source.same_outcome_mechanism(&self.target) {
            return Err(Error::Config(
                "source and target outcome mechanisms differ (concept shift is not supported)".into(),
            ));
        }
        Ok(())
    }
}

/// Which party is reading the held-back target outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeAccess {
    /// Evaluation metrics.
    Metrics,
    /// A leak-setting imputer, which is allowed to see the target outcome.
    LeakImputer,
}

/// Target-domain ground truth, kept out of every [`MaskedDataset`] handed to
/// the adaptation pipeline. Outcome reads are counted per accessor so a run
/// can be audited for leakage.
#[derive(Debug)]
pub struct TargetTruth {
    complete: CompleteDataset,
    metric_reads: AtomicUsize,
    leak_reads: AtomicUsize,
}

impl Clone for TargetTruth {
    fn clone(&self) -> Self {
        TargetTruth::new(self.complete.clone())
    }
}

impl TargetTruth {
    pub fn new(complete: CompleteDataset) -> Self {
        TargetTruth {
            complete,
            metric_reads: AtomicUsize::new(0),
            leak_reads: AtomicUsize::new(0),
        }
    }

    pub fn outcome(&self, access: OutcomeAccess) -> &[f64] {
        match access {
            OutcomeAccess::Metrics => self.metric_reads.fetch_add(1, Ordering::Relaxed),
            OutcomeAccess::LeakImputer => self.leak_reads.fetch_add(1, Ordering::Relaxed),
        };
        &self.complete.y
    }

    /// Counterfactual covariates (evaluation only).
    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.complete.x
    }

    pub fn indicators(&self) -> &DMatrix<bool> {
        &self.complete.r
    }

    /// (metric reads, leak-imputer reads).
    pub fn outcome_reads(&self) -> (usize, usize) {
        (
            self.metric_reads.load(Ordering::Relaxed),
            self.leak_reads.load(Ordering::Relaxed),
        )
    }

    pub fn n(&self) -> usize {
        self.complete.n()
    }
}

#[derive(Debug, Clone)]
pub struct DomainSplit {
    /// Masked source covariates with the outcome.
    pub source: MaskedDataset,
    /// Masked target covariates, no outcome.
    pub target: MaskedDataset,
    /// Source ground truth (for source imputation error).
    pub source_complete: CompleteDataset,
    pub target_truth: TargetTruth,
}

pub fn domain_sizes(n_total: usize, target_prop: f64) -> Result<(usize, usize)> {
    if !(target_prop > 0.0 && target_prop < 1.0) {
        return Err(Error::Config(format!("target proportion must be in (0, 1), got {target_prop}")));
    }
    let n_target = (n_total as f64 * target_prop).round() as usize;
    let n_source = n_total.saturating_sub(n_target);
    if n_target == 0 || n_source == 0 {
        return Err(Error::Config(format!(
            "n_total {n_total} with target proportion {target_prop} leaves an empty domain"
        )));
    }
    Ok((n_source, n_target))
}

/// Generate source and target samples from their own parameter sets and mask
/// them. The target outcome and counterfactual covariates are returned only
/// inside [`TargetTruth`].
pub fn split_domains(n_total: usize, target_prop: f64, shift: &ShiftConfig, seed: u64) -> Result<DomainSplit> {
    shift.validate()?;
    let (n_source, n_target) = domain_sizes(n_total, target_prop)?;
    let root = SeedTree::new(seed);
    let source_complete = generate_with(n_source, &shift.dag, &shift.source, &root.child("source"))?;
    let target_complete = generate_with(n_target, &shift.dag, &shift.target, &root.child("target"))?;
    let source = apply_mask(&source_complete, Domain::Source);
    let target = apply_mask(&target_complete, Domain::Target).without_outcome();
    Ok(DomainSplit {
        source,
        target,
        source_complete,
        target_truth: TargetTruth::new(target_complete),
    })
}

/// How source and target differ in a factorial cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecipe {
    /// Missingness rate of the source indicators.
    pub source_rate: f64,
    /// Missingness rate of the target indicators.
    pub target_rate: f64,
    /// Re-draw the target's missingness coefficients independently.
    pub redraw_target_missingness: bool,
    /// Additive offset applied to the target covariate intercepts.
    pub covariate_offset: f64,
}

impl Default for ShiftRecipe {
    fn default() -> Self {
        ShiftRecipe {
            source_rate: 0.05,
            target_rate: 0.3,
            redraw_target_missingness: true,
            covariate_offset: 0.0,
        }
    }
}

/// Draw a structural model and derive source/target parameter sets from it.
///
/// `param_seed` drives the shared coefficient draws; `mask_seed` drives the
/// calibration runs. Both domains share the covariate and outcome equations;
/// the target gets independently drawn missingness coefficients and both
/// intercept pairs are calibrated to their rates. Calibration failures
/// (pathological draws) are retried with fresh coefficients up to
/// `MAX_REDRAWS` times.
pub fn build_shift(
    dag: &DagSpec,
    nonlinearity: usize,
    recipe: &ShiftRecipe,
    param_seed: u64,
    mask_seed: u64,
) -> Result<ShiftConfig> {
    const MAX_REDRAWS: u64 = 20;
    let mut last_err = None;
    for attempt in 0..MAX_REDRAWS {
        let seed = SeedTree::new(param_seed).index(attempt).value();
        match try_build_shift(dag, nonlinearity, recipe, seed, mask_seed) {
            Ok(cfg) => return Ok(cfg),
            Err(e @ Error::Calibration { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn try_build_shift(
    dag: &DagSpec,
    nonlinearity: usize,
    recipe: &ShiftRecipe,
    param_seed: u64,
    mask_seed: u64,
) -> Result<ShiftConfig> {
    let base = sample_params(dag, nonlinearity, param_seed)?;
    let mut source = base.clone();
    let mut target = if recipe.redraw_target_missingness {
        redraw_missingness(&base, dag, param_seed)
    } else {
        base.clone()
    };
    for a in target.alpha_x.iter_mut() {
        *a += recipe.covariate_offset;
    }
    let mask_root = SeedTree::new(mask_seed);
    source.alpha_r = calibrate_missingness_intercept(&source, dag, recipe.source_rate, mask_root.child("source").value())?;
    target.alpha_r = calibrate_missingness_intercept(&target, dag, recipe.target_rate, mask_root.child("target").value())?;
    ShiftConfig::new(*dag, source, target)
}
