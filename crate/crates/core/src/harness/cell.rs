use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{CellSpec, FactorialConfig, Method};
use crate::adapt::{fit_domain_classifier, fit_weighted_outcome, importance_weights, predict_target, OutcomeKind};
use crate::error::{Error, Result};
use crate::impute::{impute, ImputedDataset, ImputerConfig};
use crate::metrics::{imputation_rmse, rmse};
use crate::simgen::{
    build_shift, split_domains, DagSpec, DomainSplit, MaskedDataset, OutcomeAccess, ShiftRecipe, TargetTruth,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    ImputerError,
    ClassifierError,
    /// The cell's data could not be generated (calibration failed on every redraw).
    GeneratorError,
}

impl CellStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::ImputerError => "imputer_error",
            CellStatus::ClassifierError => "classifier_error",
            CellStatus::GeneratorError => "generator_error",
        }
    }
}

/// One result row: a cell, a method and its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCellResult {
    pub n: usize,
    pub target_prop: f64,
    pub miss_pct: f64,
    pub dag: u8,
    pub nonlinearity: usize,
    pub method: Method,
    pub rep: usize,
    pub seed: u64,
    pub status: CellStatus,
    pub target_rmse: Option<f64>,
    pub imp_rmse_source: Option<f64>,
    pub imp_rmse_target: Option<f64>,
    pub runtime_ms: Option<u64>,
    /// Target-outcome reads made on behalf of the imputer (nonzero only for leak methods).
    pub leak_reads: usize,
    pub error: Option<String>,
}

impl SimCellResult {
    pub fn cell(&self) -> CellSpec {
        CellSpec {
            n: self.n,
            target_prop: self.target_prop,
            miss_pct: self.miss_pct,
            dag: self.dag,
            nonlinearity: self.nonlinearity,
            rep: self.rep,
        }
    }

    /// Sort key: cell id then method.
    pub fn key(&self) -> (String, Method) {
        (self.cell().id(), self.method)
    }

    pub fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

struct Metrics {
    target_rmse: f64,
    imp_rmse_source: Option<f64>,
    imp_rmse_target: Option<f64>,
}

/// Run every configured method on one cell.
pub fn run_cell(cell: &CellSpec, cfg: &FactorialConfig) -> Vec<SimCellResult> {
    let seeds = cell.seeds(cfg.master_seed);
    let row = |method: Method| SimCellResult {
        n: cell.n,
        target_prop: cell.target_prop,
        miss_pct: cell.miss_pct,
        dag: cell.dag,
        nonlinearity: cell.nonlinearity,
        method,
        rep: cell.rep,
        seed: seeds.cell,
        status: CellStatus::Ok,
        target_rmse: None,
        imp_rmse_source: None,
        imp_rmse_target: None,
        runtime_ms: None,
        leak_reads: 0,
        error: None,
    };

    let split = DagSpec::new(cell.dag).and_then(|dag| {
        let recipe = ShiftRecipe {
            source_rate: cfg.source_miss_anchor,
            target_rate: cell.miss_pct,
            redraw_target_missingness: true,
            covariate_offset: cfg.covariate_shift,
        };
        let shift = build_shift(&dag, cell.nonlinearity, &recipe, seeds.params, seeds.mask)?;
        split_domains(cell.n, cell.target_prop, &shift, seeds.data)
    });
    let split = match split {
        Ok(s) => s,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| SimCellResult {
                    status: CellStatus::GeneratorError,
                    error: Some(e.to_string()),
                    ..row(m)
                })
                .collect();
        }
    };

    // source imputations do not depend on the leak flag; share them
    let mut source_cache: HashMap<String, std::result::Result<ImputedDataset, String>> = HashMap::new();
    let mut out = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let leak_before = split.target_truth.outcome_reads().1;
        let imputer = method.imputer(&cfg.imputer);
        let method_seed = crate::rng::SeedTree::new(seeds.impute).child(method.as_str());
        let imputed = impute_pair(&split, imputer.as_ref(), seeds.impute, method_seed.value(), &mut source_cache);
        let mut r = row(method);
        match imputed {
            Err(e) => {
                r.status = CellStatus::ImputerError;
                r.error = Some(e);
            }
            Ok((src, tgt)) => match evaluate(&split, &src, &tgt, cfg) {
                Ok(m) => {
                    r.target_rmse = Some(m.target_rmse);
                    r.imp_rmse_source = m.imp_rmse_source;
                    r.imp_rmse_target = m.imp_rmse_target;
                }
                Err(e) => {
                    r.status = CellStatus::ClassifierError;
                    r.error = Some(e.to_string());
                }
            },
        }
        r.leak_reads = split.target_truth.outcome_reads().1 - leak_before;
        if cfg.record_timing {
            r.runtime_ms = Some(start.elapsed().as_millis() as u64);
        }
        out.push(r);
    }
    out
}

/// Source and target imputations. The oracle fills masked cells with the
/// truth. Leak imputers receive the target outcome through the audited
/// accessor.
fn impute_pair(
    split: &DomainSplit,
    imputer: Option<&ImputerConfig>,
    source_seed: u64,
    target_seed: u64,
    cache: &mut HashMap<String, std::result::Result<ImputedDataset, String>>,
) -> std::result::Result<(ImputedDataset, ImputedDataset), String> {
    let Some(cfg) = imputer else {
        let src = truth_fill(&split.source, &split.source_complete.x).map_err(|e| e.to_string())?;
        let tgt = truth_fill(&split.target, split.target_truth.covariates()).map_err(|e| e.to_string())?;
        return Ok((src, tgt));
    };
    let source_cfg = ImputerConfig { leak: false, ..*cfg };
    let src = cache
        .entry(format!("{source_cfg:?}"))
        .or_insert_with(|| {
            let seed = crate::rng::SeedTree::new(source_seed).child("source").value();
            impute(&split.source, &source_cfg, seed).map_err(|e| format!("source: {e}"))
        })
        .clone()?;
    let tgt = impute_target(&split.target, &split.target_truth, cfg, target_seed).map_err(|e| format!("target: {e}"))?;
    Ok((src, tgt))
}

fn impute_target(target: &MaskedDataset, truth: &TargetTruth, cfg: &ImputerConfig, seed: u64) -> Result<ImputedDataset> {
    if cfg.leak {
        let with_y = target.with_outcome(truth.outcome(OutcomeAccess::LeakImputer).to_vec())?;
        impute(&with_y, cfg, seed)
    } else {
        impute(target, cfg, seed)
    }
}

fn truth_fill(ds: &MaskedDataset, truth: &nalgebra::DMatrix<f64>) -> Result<ImputedDataset> {
    ImputedDataset::from_parts(
        ds.names().to_vec(),
        truth.clone(),
        ds.observed_pattern().clone(),
        ds.maskable().to_vec(),
        None,
    )
}

fn evaluate(split: &DomainSplit, src: &ImputedDataset, tgt: &ImputedDataset, cfg: &FactorialConfig) -> Result<Metrics> {
    let y_source = split
        .source
        .outcome()
        .ok_or_else(|| Error::Invalid("source outcome missing".into()))?;
    let clf = fit_domain_classifier(src, tgt)?;
    let w = importance_weights(&clf, src, &cfg.weights)?;
    let model = fit_weighted_outcome(src, y_source, Some(&w), OutcomeKind::Linear)?;
    let pred = predict_target(&model, tgt)?;
    let target_rmse = rmse(&pred, split.target_truth.outcome(OutcomeAccess::Metrics))?;
    let imp_rmse_source = imputation_rmse(src.values(), &split.source_complete.x, src.observed_pattern())?;
    let imp_rmse_target = imputation_rmse(tgt.values(), split.target_truth.covariates(), tgt.observed_pattern())?;
    Ok(Metrics {
        target_rmse,
        imp_rmse_source,
        imp_rmse_target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(methods: Vec<Method>) -> FactorialConfig {
        FactorialConfig {
            sample_sizes: vec![400],
            target_props: vec![0.5],
            miss_pcts: vec![0.2],
            dags: vec![1],
            nonlinearity: vec![1],
            imputer: super::super::config::ImputerOverrides {
                iterations: Some(300),
                burn_in: Some(100),
                ..Default::default()
            },
            ..FactorialConfig::full_design(3, 1, methods)
        }
    }

    #[test]
    fn one_row_per_method_and_deterministic() {
        let c = cfg(vec![Method::Mean, Method::MicePmm, Method::Oracle, Method::Joint]);
        let cell = c.cells()[0];
        let a = run_cell(&cell, &c);
        let b = run_cell(&cell, &c);
        assert_eq!(a.len(), 4);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for r in &a {
            assert!(r.is_ok(), "{r:?}");
            assert!(r.target_rmse.unwrap() > 0.5);
        }
        let oracle = a.iter().find(|r| r.method == Method::Oracle).unwrap();
        assert_eq!(oracle.imp_rmse_target, Some(0.0));
    }

    #[test]
    fn leak_reads_only_for_leak_methods() {
        let c = cfg(vec![Method::Mean, Method::ZModelNl, Method::JointNl, Method::Joint]);
        let rows = run_cell(&c.cells()[0], &c);
        for r in rows {
            assert_eq!(r.leak_reads, (r.method == Method::Joint) as usize, "{:?}", r.method);
        }
    }

    #[test]
    fn imputer_failure_is_contained() {
        let mut c = cfg(vec![Method::MicePmm, Method::Mean]);
        c.imputer.donors = Some(100_000);
        let rows = run_cell(&c.cells()[0], &c);
        assert_eq!(rows[0].status, CellStatus::ImputerError);
        assert!(rows[0].target_rmse.is_none() && rows[0].error.is_some());
        assert!(rows[1].is_ok());
    }
}
