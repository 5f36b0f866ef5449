use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::WeightOptions;
use crate::error::{Error, Result};
use crate::impute::{BayesVariant, ImputerConfig};
use crate::rng::SeedTree;
use crate::simgen::{check_nonlinearity, DagSpec};

/// Pipelines compared in a factorial run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mean,
    MiceNorm,
    MicePmm,
    MiceRi,
    ZModel,
    ZModelNl,
    Joint,
    JointNl,
    NoOutcome,
    NoMissingness,
    /// Fill masked cells with their true values (benchmark only).
    Oracle,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Mean,
        Method::MiceNorm,
        Method::MicePmm,
        Method::MiceRi,
        Method::ZModel,
        Method::ZModelNl,
        Method::Joint,
        Method::JointNl,
        Method::NoOutcome,
        Method::NoMissingness,
        Method::Oracle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::MiceNorm => "mice_norm",
            Method::MicePmm => "mice_pmm",
            Method::MiceRi => "mice_ri",
            Method::ZModel => "z_model",
            Method::ZModelNl => "z_model_nl",
            Method::Joint => "joint",
            Method::JointNl => "joint_nl",
            Method::NoOutcome => "no_outcome",
            Method::NoMissingness => "no_missingness",
            Method::Oracle => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }

    /// Imputer for this method; `None` for the oracle.
    pub fn imputer(&self, overrides: &ImputerOverrides) -> Option<ImputerConfig> {
        let base = match self {
            Method::Mean => ImputerConfig::mean(),
            Method::MiceNorm => ImputerConfig::mice_norm(),
            Method::MicePmm => ImputerConfig::mice_pmm(),
            Method::MiceRi => ImputerConfig::mice_ri(),
            Method::ZModel => ImputerConfig::bayes(BayesVariant::ZModel, true),
            Method::ZModelNl => ImputerConfig::bayes(BayesVariant::ZModel, false),
            Method::Joint => ImputerConfig::bayes(BayesVariant::Joint, true),
            Method::JointNl => ImputerConfig::bayes(BayesVariant::Joint, false),
            Method::NoOutcome => ImputerConfig::bayes(BayesVariant::NoOutcome, false),
            Method::NoMissingness => ImputerConfig::bayes(BayesVariant::NoMissingness, false),
            Method::Oracle => return None,
        };
        Some(overrides.apply(base))
    }
}

/// Optional replacements for imputer defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputerOverrides {
    pub cycles: Option<usize>,
    pub donors: Option<usize>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub prior_sd: Option<f64>,
}

impl ImputerOverrides {
    pub fn apply(&self, mut cfg: ImputerConfig) -> ImputerConfig {
        if let Some(v) = self.cycles {
            cfg.cycles = v;
        }
        if let Some(v) = self.donors {
            cfg.donors = v;
        }
        if let Some(v) = self.iterations {
            cfg.mcmc.iterations = v;
        }
        if let Some(v) = self.burn_in {
            cfg.mcmc.burn_in = v;
        }
        if let Some(v) = self.prior_sd {
            cfg.mcmc.prior_sd = v;
        }
        cfg
    }
}

fn default_anchor() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorialConfig {
    pub master_seed: u64,
    pub reps: usize,
    pub sample_sizes: Vec<usize>,
    pub target_props: Vec<f64>,
    /// Target-domain missingness rates.
    pub miss_pcts: Vec<f64>,
    pub dags: Vec<u8>,
    pub nonlinearity: Vec<usize>,
    pub methods: Vec<Method>,
    /// Missingness rate of the source domain in every cell.
    #[serde(default = "default_anchor")]
    pub source_miss_anchor: f64,
    /// Offset added to the target covariate intercepts (0 = missingness shift only).
    #[serde(default)]
    pub covariate_shift: f64,
    /// Record wall-clock time per row (makes reruns differ in that field).
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub imputer: ImputerOverrides,
    #[serde(default)]
    pub weights: WeightOptions,
}

impl FactorialConfig {
    /// The full design grid: 5 sizes x 3 target proportions x 6 rates x 8
    /// graphs x 4 nonlinearity levels.
    pub fn full_design(master_seed: u64, reps: usize, methods: Vec<Method>) -> Self {
        FactorialConfig {
            master_seed,
            reps,
            sample_sizes: vec![750, 1000, 1500, 3000, 5000],
            target_props: vec![0.3, 0.5, 0.75],
            miss_pcts: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            dags: (1..=8).collect(),
            nonlinearity: vec![1, 3, 5, 7],
            methods,
            source_miss_anchor: default_anchor(),
            covariate_shift: 0.0,
            record_timing: false,
            imputer: ImputerOverrides::default(),
            weights: WeightOptions::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: FactorialConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::Config(format!("`{name}` must not be empty")))
            } else {
                Ok(())
            }
        };
        empty("sample_sizes", self.sample_sizes.len())?;
        empty("target_props", self.target_props.len())?;
        empty("miss_pcts", self.miss_pcts.len())?;
        empty("dags", self.dags.len())?;
        empty("nonlinearity", self.nonlinearity.len())?;
        empty("methods", self.methods.len())?;
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        for &n in &self.sample_sizes {
            if n < 20 {
                return Err(Error::Config(format!("sample size {n} is too small")));
            }
        }
        for &p in &self.target_props {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("target proportion {p} not in (0, 1)")));
            }
        }
        for &m in self.miss_pcts.iter().chain(std::iter::once(&self.source_miss_anchor)) {
            if !(m > 0.0 && m < 1.0) {
                return Err(Error::Config(format!("missingness rate {m} not in (0, 1)")));
            }
        }
        for &d in &self.dags {
            DagSpec::new(d)?;
        }
        for &k in &self.nonlinearity {
            check_nonlinearity(k)?;
        }
        for m in &self.methods {
            if let Some(c) = m.imputer(&self.imputer) {
                c.validate()?;
            }
        }
        if !self.covariate_shift.is_finite() {
            return Err(Error::Config("covariate_shift must be finite".into()));
        }
        Ok(())
    }

    /// Every cell (design point x replicate) in a fixed order.
    pub fn cells(&self) -> Vec<CellSpec> {
        let mut out = Vec::new();
        for &n in &self.sample_sizes {
            for &target_prop in &self.target_props {
                for &miss_pct in &self.miss_pcts {
                    for &dag in &self.dags {
                        for &nonlinearity in &self.nonlinearity {
                            for rep in 0..self.reps {
                                out.push(CellSpec {
                                    n,
                                    target_prop,
                                    miss_pct,
                                    dag,
                                    nonlinearity,
                                    rep,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One design point and replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub n: usize,
    pub target_prop: f64,
    pub miss_pct: f64,
    pub dag: u8,
    pub nonlinearity: usize,
    pub rep: usize,
}

/// Seeds of one cell.
///
/// Structural parameters and raw data depend on everything except the
/// missingness rate, so cells that differ only in `miss_pct` share the same
/// model and sample and differ only in their masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub cell: u64,
    pub params: u64,
    pub data: u64,
    pub mask: u64,
    pub impute: u64,
}

impl CellSpec {
    fn base(&self, master_seed: u64, tag: &str) -> SeedTree {
        SeedTree::new(master_seed)
            .child(tag)
            .index(self.n as u64)
            .index(self.target_prop.to_bits())
            .index(self.dag as u64)
            .index(self.nonlinearity as u64)
            .index(self.rep as u64)
    }

    pub fn seeds(&self, master_seed: u64) -> CellSeeds {
        let with_miss = |tag: &str| self.base(master_seed, tag).index(self.miss_pct.to_bits()).value();
        CellSeeds {
            cell: with_miss("cell"),
            params: self.base(master_seed, "params").value(),
            data: self.base(master_seed, "data").value(),
            mask: with_miss("mask"),
            impute: with_miss("impute"),
        }
    }

    /// Stable sort key.
    pub fn id(&self) -> String {
        format!(
            "n{}_t{}_m{}_d{}_k{}_r{}",
            self.n, self.target_prop, self.miss_pct, self.dag, self.nonlinearity, self.rep
        )
    }
}
