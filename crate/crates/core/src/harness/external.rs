//! Loading a real two-domain CSV and running the adaptation pipeline on it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::adapt::{
    fit_domain_classifier, fit_weighted_outcome, importance_weights, predict_target, OutcomeKind, WeightOptions,
};
use crate::error::{Error, Result};
use crate::impute::{impute, ImputerConfig};
use crate::metrics::{auroc, brier, rmse};
use crate::rng::SeedTree;
use crate::simgen::{Domain, MaskedDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Real,
    Binary,
    /// String codes, one-hot encoded against the first level in sorted order.
    Categorical,
}

fn default_na() -> String {
    "NA".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSchema {
    pub outcome: String,
    pub domain: String,
    /// Level of the domain column that marks source rows; defaults to the
    /// first level seen in the file.
    #[serde(default)]
    pub source_level: Option<String>,
    /// Cells equal to this token (or empty) are missing.
    #[serde(default = "default_na")]
    pub na_token: String,
    pub columns: BTreeMap<String, ColumnType>,
}

impl ExternalSchema {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schema: ExternalSchema = toml::from_str(s)?;
        if schema.columns.is_empty() {
            return Err(Error::Config("schema lists no covariates".into()));
        }
        if schema.columns.contains_key(&schema.outcome) || schema.columns.contains_key(&schema.domain) {
            return Err(Error::Config("outcome and domain columns cannot be covariates".into()));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct ExternalData {
    pub source: MaskedDataset,
    /// Covariates only; labels are kept in `target_labels`.
    pub target: MaskedDataset,
    pub target_labels: Vec<f64>,
    pub outcome_kind: OutcomeKind,
    /// Positive rate over all rows for a binary outcome.
    pub prevalence: Option<f64>,
    pub source_level: String,
    pub target_level: String,
    /// Fraction of schema covariate cells that are NA, per domain.
    pub source_missing_rate: f64,
    pub target_missing_rate: f64,
}

fn parse_cell(raw: &str, col: &str, ty: ColumnType, na: &str) -> Result<Option<String>> {
    let v = raw.trim();
    if v.is_empty() || v == na {
        return Ok(None);
    }
    match ty {
        ColumnType::Real => {
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::Schema(format!("column `{col}`: mixed types, `{v}` is not a number")))?;
        }
        ColumnType::Binary => {
            if v != "0" && v != "1" {
                return Err(Error::Schema(format!("column `{col}`: mixed types, `{v}` is not 0/1")));
            }
        }
        ColumnType::Categorical => {}
    }
    Ok(Some(v.to_string()))
}

pub fn load_external_csv(path: &Path, schema: &ExternalSchema) -> Result<ExternalData> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let position = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("unknown column `{name}`: not in file header")))
    };
    let outcome_at = position(&schema.outcome)?;
    let domain_at = position(&schema.domain)?;
    // covariates in file order
    let mut covs: Vec<(String, ColumnType, usize)> = Vec::new();
    for name in schema.columns.keys() {
        position(name)?;
    }
    for (k, h) in header.iter().enumerate() {
        if let Some(&ty) = schema.columns.get(h) {
            covs.push((h.clone(), ty, k));
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = Vec::new();
    let mut outcome: Vec<Option<f64>> = Vec::new();
    let mut domains: Vec<String> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let dom = rec.get(domain_at).unwrap_or("").trim().to_string();
        if dom.is_empty() || dom == schema.na_token {
            return Err(Error::Invalid(format!("row {line}: domain is missing")));
        }
        domains.push(dom);
        let y = parse_cell(rec.get(outcome_at).unwrap_or(""), &schema.outcome, ColumnType::Real, &schema.na_token)?;
        outcome.push(y.map(|s| s.parse().expect("validated")));
        let row = covs
            .iter()
            .map(|(name, ty, k)| parse_cell(rec.get(*k).unwrap_or(""), name, *ty, &schema.na_token))
            .collect::<Result<Vec<_>>>()?;
        cells.push(row);
    }
    if cells.is_empty() {
        return Err(Error::Insufficient("file has no data rows".into()));
    }

    let mut levels: Vec<String> = Vec::new();
    for d in &domains {
        if !levels.contains(d) {
            levels.push(d.clone());
        }
    }
    if levels.len() != 2 {
        return Err(Error::Invalid(format!(
            "domain column `{}` must have exactly 2 levels, found {}",
            schema.domain,
            levels.len()
        )));
    }
    let source_level = match &schema.source_level {
        Some(s) if levels.contains(s) => s.clone(),
        Some(s) => return Err(Error::Config(format!("source level `{s}` not present in domain column"))),
        None => levels[0].clone(),
    };
    let target_level = levels.iter().find(|l| **l != source_level).expect("two levels").clone();

    if let Some(i) = outcome.iter().position(|y| y.is_none()) {
        return Err(Error::Invalid(format!("outcome `{}` is missing in row {i}", schema.outcome)));
    }
    let outcome: Vec<f64> = outcome.into_iter().map(|y| y.expect("checked")).collect();
    let binary = outcome.iter().all(|&y| y == 0.0 || y == 1.0);

    // encode covariates
    let mut names: Vec<String> = Vec::new();
    let mut encoded: Vec<Vec<Option<f64>>> = vec![Vec::new(); cells.len()];
    for (c, (name, ty, _)) in covs.iter().enumerate() {
        if cells.iter().all(|r| r[c].is_none()) {
            return Err(Error::FullyMissing { column: name.clone() });
        }
        match ty {
            ColumnType::Real | ColumnType::Binary => {
                names.push(name.clone());
                for (row, out) in cells.iter().zip(encoded.iter_mut()) {
                    out.push(row[c].as_ref().map(|s| s.parse().expect("validated")));
                }
            }
            ColumnType::Categorical => {
                let lv: BTreeSet<&String> = cells.iter().filter_map(|r| r[c].as_ref()).collect();
                let lv: Vec<&String> = lv.into_iter().collect();
                for level in lv.iter().skip(1) {
                    names.push(format!("{name}={level}"));
                    for (row, out) in cells.iter().zip(encoded.iter_mut()) {
                        out.push(row[c].as_ref().map(|s| (s == *level) as u8 as f64));
                    }
                }
            }
        }
    }

    let p = names.len();
    if p == 0 {
        return Err(Error::Schema("no covariate columns after encoding".into()));
    }
    let maskable: Vec<usize> = (0..p).filter(|&j| encoded.iter().any(|r| r[j].is_none())).collect();
    let build = |level: &str, y: Option<Vec<f64>>, domain: Domain| -> Result<MaskedDataset> {
        let rows: Vec<&Vec<Option<f64>>> = encoded
            .iter()
            .zip(&domains)
            .filter(|(_, d)| *d == level)
            .map(|(r, _)| r)
            .collect();
        let n = rows.len();
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or(f64::NAN));
        let observed = DMatrix::from_fn(n, p, |i, j| rows[i][j].is_some());
        MaskedDataset::new(names.clone(), values, observed, maskable.clone(), y, domain)
    };
    let pick = |level: &str| -> Vec<f64> {
        outcome
            .iter()
            .zip(&domains)
            .filter(|(_, d)| *d == level)
            .map(|(y, _)| *y)
            .collect()
    };
    let missing_rate = |level: &str| -> f64 {
        let rows: Vec<&Vec<Option<String>>> =
            cells.iter().zip(&domains).filter(|(_, d)| *d == level).map(|(r, _)| r).collect();
        let na: usize = rows.iter().map(|r| r.iter().filter(|c| c.is_none()).count()).sum();
        na as f64 / (rows.len() * covs.len()) as f64
    };

    Ok(ExternalData {
        source: build(&source_level, Some(pick(&source_level)), Domain::Source)?,
        target: build(&target_level, None, Domain::Target)?,
        target_labels: pick(&target_level),
        outcome_kind: if binary { OutcomeKind::Logistic } else { OutcomeKind::Linear },
        prevalence: binary.then(|| outcome.iter().sum::<f64>() / outcome.len() as f64),
        source_missing_rate: missing_rate(&source_level),
        target_missing_rate: missing_rate(&target_level),
        source_level,
        target_level,
    })
}

/// Target predictions and held-out evaluation of one imputer on external data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplyResult {
    pub method: String,
    pub outcome_kind: OutcomeKind,
    pub predictions: Vec<f64>,
    pub unweighted_predictions: Vec<f64>,
    pub source_weights: Vec<f64>,
    pub rmse: f64,
    pub unweighted_rmse: f64,
    pub brier: Option<f64>,
    pub unweighted_brier: Option<f64>,
    pub auroc: Option<f64>,
    pub unweighted_auroc: Option<f64>,
}

pub fn apply_external(
    data: &ExternalData,
    imputer: &ImputerConfig,
    weights: &WeightOptions,
    seed: u64,
) -> Result<ApplyResult> {
    if imputer.leak {
        return Err(Error::Config("leak imputers cannot be applied: target labels are held out".into()));
    }
    let root = SeedTree::new(seed);
    let src = impute(&data.source, imputer, root.child("source").value())?;
    let tgt = impute(&data.target, imputer, root.child("target").value())?;
    let y = data.source.outcome().expect("source carries the outcome");
    let clf = fit_domain_classifier(&src, &tgt)?;
    let w = importance_weights(&clf, &src, weights)?;
    let weighted = fit_weighted_outcome(&src, y, Some(&w), data.outcome_kind)?;
    let plain = fit_weighted_outcome(&src, y, None, data.outcome_kind)?;
    let pred = predict_target(&weighted, &tgt)?;
    let pred0 = predict_target(&plain, &tgt)?;
    let labels = &data.target_labels;
    let binary = data.outcome_kind == OutcomeKind::Logistic;
    Ok(ApplyResult {
        method: imputer.label(),
        outcome_kind: data.outcome_kind,
        rmse: rmse(&pred, labels)?,
        unweighted_rmse: rmse(&pred0, labels)?,
        brier: if binary { Some(brier(&pred, labels)?) } else { None },
        unweighted_brier: if binary { Some(brier(&pred0, labels)?) } else { None },
        auroc: if binary { auroc(&pred, labels)? } else { None },
        unweighted_auroc: if binary { auroc(&pred0, labels)? } else { None },
        predictions: pred,
        unweighted_predictions: pred0,
        source_weights: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema() -> ExternalSchema {
        ExternalSchema::from_toml_str(
            r#"
outcome = "y"
domain = "site"
source_level = "a"
[columns]
age = "real"
female = "binary"
unit = "categorical"
"#,
        )
        .unwrap()
    }

    fn file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn one_hot_and_mask() {
        let f = file("site,age,female,unit,y\na,50,1,icu,0\na,NA,0,ccu,1\nb,61,,icu,0\nb,70,1,med,1\n");
        let d = load_external_csv(f.path(), &schema()).unwrap();
        assert_eq!(d.source.names(), ["age", "female", "unit=icu", "unit=med"]);
        assert_eq!(d.source.n(), 2);
        assert_eq!(d.target.n(), 2);
        assert!(!d.source.is_observed(1, 0));
        assert!(!d.target.is_observed(0, 1));
        assert_eq!(d.source.get(1, 2), Some(0.0));
        assert_eq!(d.target.get(1, 3), Some(1.0));
        assert!(d.target.outcome().is_none());
        assert_eq!(d.target_labels, vec![0.0, 1.0]);
        assert_eq!(d.prevalence, Some(0.5));
        assert_eq!(d.outcome_kind, OutcomeKind::Logistic);
        assert!((d.source_missing_rate - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn schema_errors() {
        let bad_type = file("site,age,female,unit,y\na,old,1,icu,0\nb,1,0,icu,1\n");
        assert!(matches!(load_external_csv(bad_type.path(), &schema()), Err(Error::Schema(_))));
        let missing_col = file("site,age,unit,y\na,1,icu,0\nb,1,icu,1\n");
        assert!(matches!(load_external_csv(missing_col.path(), &schema()), Err(Error::Schema(_))));
        let all_na = file("site,age,female,unit,y\na,NA,1,icu,0\nb,,0,icu,1\n");
        assert!(matches!(load_external_csv(all_na.path(), &schema()), Err(Error::FullyMissing { .. })));
        let three = file("site,age,female,unit,y\na,1,1,icu,0\nb,2,0,icu,1\nc,3,0,icu,1\n");
        assert!(load_external_csv(three.path(), &schema()).is_err());
    }
}
