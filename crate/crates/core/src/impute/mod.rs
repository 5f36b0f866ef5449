//! Imputers for masked covariates.
//!
//! Every imputer consumes one [`MaskedDataset`] (one domain) and returns an
//! [`ImputedDataset`] whose observed cells are bit-identical to the input.
//! Source and target are imputed independently.

mod bayes;
mod conjugate;
mod mean;
mod mice;
mod truncnorm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::{Domain, MaskedDataset};

pub use bayes::{impute_bayes, run_gibbs, EquationSummary, GibbsRun};
pub use conjugate::{conjugate_posterior, ConjugatePosterior, NoiseModel};
pub use mean::impute_mean;
pub use mice::{impute_mice_norm, impute_mice_pmm, impute_mice_ri, RandomIndicatorOffset};
pub use truncnorm::{sample_truncated_above, sample_truncated_below};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeMethod {
    Mean,
    MiceNorm,
    MicePmm,
    MiceRi,
    Bayes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesVariant {
    /// Covariates, indicators and outcome plus one latent factor per row.
    ZModel,
    /// Covariates, indicators and outcome.
    Joint,
    /// Covariates and indicators.
    NoOutcome,
    /// Covariates only.
    NoMissingness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Prior standard deviation of every regression coefficient.
    pub prior_sd: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 2000,
            burn_in: 500,
            prior_sd: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputerConfig {
    pub method: ImputeMethod,
    pub bayes_variant: BayesVariant,
    /// Let a joint/z model condition on the target outcome.
    pub leak: bool,
    /// Chained-equation sweeps.
    pub cycles: usize,
    /// Donor pool size for predictive mean matching.
    pub donors: usize,
    pub mcmc: McmcConfig,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            method: ImputeMethod::Mean,
            bayes_variant: BayesVariant::Joint,
            leak: false,
            cycles: 10,
            donors: 5,
            mcmc: McmcConfig::default(),
        }
    }
}

impl ImputerConfig {
    pub fn mean() -> Self {
        Self::default()
    }

    pub fn mice_norm() -> Self {
        ImputerConfig {
            method: ImputeMethod::MiceNorm,
            ..Self::default()
        }
    }

    pub fn mice_pmm() -> Self {
        ImputerConfig {
            method: ImputeMethod::MicePmm,
            ..Self::default()
        }
    }

    pub fn mice_ri() -> Self {
        ImputerConfig {
            method: ImputeMethod::MiceRi,
            ..Self::default()
        }
    }

    pub fn bayes(variant: BayesVariant, leak: bool) -> Self {
        ImputerConfig {
            method: ImputeMethod::Bayes,
            bayes_variant: variant,
            leak,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.donors < 1 {
            return Err(Error::Config("donors must be at least 1".into()));
        }
        if self.cycles < 1 {
            return Err(Error::Config("cycles must be at least 1".into()));
        }
        if self.mcmc.iterations <= self.mcmc.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.mcmc.iterations, self.mcmc.burn_in
            )));
        }
        if !(1.0..=5.0).contains(&self.mcmc.prior_sd) {
            return Err(Error::Config(format!("prior_sd must lie in [1, 5], got {}", self.mcmc.prior_sd)));
        }
        Ok(())
    }

    /// Short label, e.g. `mice_pmm` or `joint_nl`.
    pub fn label(&self) -> String {
        match self.method {
            ImputeMethod::Mean => "mean".into(),
            ImputeMethod::MiceNorm => "mice_norm".into(),
            ImputeMethod::MicePmm => "mice_pmm".into(),
            ImputeMethod::MiceRi => "mice_ri".into(),
            ImputeMethod::Bayes => {
                let base = match self.bayes_variant {
                    BayesVariant::ZModel => "z_model",
                    BayesVariant::Joint => "joint",
                    BayesVariant::NoOutcome => return "no_outcome".into(),
                    BayesVariant::NoMissingness => return "no_missingness".into(),
                };
                if self.leak {
                    base.into()
                } else {
                    format!("{base}_nl")
                }
            }
        }
    }

    /// Whether this imputer reads the outcome of a dataset in `domain`.
    pub fn reads_outcome(&self, domain: Domain) -> bool {
        self.method == ImputeMethod::Bayes
            && matches!(self.bayes_variant, BayesVariant::ZModel | BayesVariant::Joint)
            && (domain == Domain::Source || self.leak)
    }
}

/// Per-imputer extra output.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeDiagnostics {
    /// Random-indicator offsets, one per incomplete column.
    pub ri_offsets: Vec<RandomIndicatorOffset>,
}

/// A completed covariate matrix together with the mask it was completed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedDataset {
    names: Vec<String>,
    values: DMatrix<f64>,
    observed: DMatrix<bool>,
    maskable: Vec<usize>,
    config: Option<ImputerConfig>,
    pub diagnostics: ImputeDiagnostics,
}

impl ImputedDataset {
    pub fn from_parts(
        names: Vec<String>,
        values: DMatrix<f64>,
        observed: DMatrix<bool>,
        maskable: Vec<usize>,
        config: Option<ImputerConfig>,
    ) -> Result<Self> {
        if values.shape() != observed.shape() || names.len() != values.ncols() {
            return Err(Error::Schema("imputed dataset parts disagree in shape".into()));
        }
        if let Some((i, j)) = (0..values.nrows())
            .flat_map(|i| (0..values.ncols()).map(move |j| (i, j)))
            .find(|&(i, j)| !values[(i, j)].is_finite())
        {
            return Err(Error::Invalid(format!("imputed value at row {i}, column `{}` is not finite", names[j])));
        }
        Ok(ImputedDataset {
            names,
            values,
            observed,
            maskable,
            config,
            diagnostics: ImputeDiagnostics::default(),
        })
    }

    /// Start from a masked dataset; NA cells are filled by `fill`.
    pub(crate) fn from_masked(ds: &MaskedDataset, filled: DMatrix<f64>, config: ImputerConfig) -> Result<Self> {
        let mut values = filled;
        for i in 0..ds.n() {
            for j in 0..ds.p() {
                if let Some(v) = ds.get(i, j) {
                    values[(i, j)] = v;
                }
            }
        }
        Self::from_parts(
            ds.names().to_vec(),
            values,
            ds.observed_pattern().clone(),
            ds.maskable().to_vec(),
            Some(config),
        )
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn maskable(&self) -> &[usize] {
        &self.maskable
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[(i, j)]
    }

    pub fn observed_pattern(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn config(&self) -> Option<&ImputerConfig> {
        self.config.as_ref()
    }

    /// Names of the classifier/outcome features: covariates then `R_<name>`
    /// for each maskable column.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = self.names.clone();
        out.extend(self.maskable.iter().map(|&j| format!("R_{}", self.names[j])));
        out
    }

    /// Covariates followed by 0/1 indicator columns.
    pub fn features(&self) -> DMatrix<f64> {
        let (n, p) = self.values.shape();
        let m = self.maskable.len();
        DMatrix::from_fn(n, p + m, |i, c| {
            if c < p {
                self.values[(i, c)]
            } else {
                self.observed[(i, self.maskable[c - p])] as u8 as f64
            }
        })
    }
}

/// Dispatch on `cfg.method`.
pub fn impute(ds: &MaskedDataset, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    cfg.validate()?;
    match cfg.method {
        ImputeMethod::Mean => impute_mean(ds),
        ImputeMethod::MiceNorm => impute_mice_norm(ds, cfg, seed),
        ImputeMethod::MicePmm => impute_mice_pmm(ds, cfg, seed),
        ImputeMethod::MiceRi => impute_mice_ri(ds, cfg, seed),
        ImputeMethod::Bayes => impute_bayes(ds, cfg, seed),
    }
}

pub(crate) fn check_no_fully_missing(ds: &MaskedDataset) -> Result<()> {
    for j in 0..ds.p() {
        if ds.n() > 0 && ds.missing_count(j) == ds.n() {
            return Err(Error::FullyMissing {
                column: ds.names()[j].clone(),
            });
        }
    }
    Ok(())
}

/// Observed mean of every column.
pub(crate) fn observed_means(ds: &MaskedDataset) -> Vec<f64> {
    (0..ds.p())
        .map(|j| {
            let rows = ds.observed_rows(j);
            rows.iter().map(|&i| ds.raw_values()[(i, j)]).sum::<f64>() / rows.len().max(1) as f64
        })
        .collect()
}

/// Incomplete columns sorted by ascending missing count, ties by index.
pub(crate) fn sweep_order(ds: &MaskedDataset) -> Vec<usize> {
    let mut cols = ds.incomplete_columns();
    cols.sort_by_key(|&j| (ds.missing_count(j), j));
    cols
}
