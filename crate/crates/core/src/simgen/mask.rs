use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generate::CompleteDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            other => Err(Error::Invalid(format!("unknown domain tag `{other}`"))),
        }
    }
}

/// Factually observed covariates: a value where the indicator is 1, NA where
/// it is 0. NA cells are stored as NaN and are never read by any imputer;
/// use [`MaskedDataset::get`] for checked access.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDataset {
    names: Vec<String>,
    values: DMatrix<f64>,
    observed: DMatrix<bool>,
    maskable: Vec<usize>,
    y: Option<Vec<f64>>,
    domain: Domain,
}

impl MaskedDataset {
    /// Build from full values and an observation pattern. Cells with
    /// `observed == false` are blanked regardless of their input value.
    pub fn new(
        names: Vec<String>,
        mut values: DMatrix<f64>,
        observed: DMatrix<bool>,
        maskable: Vec<usize>,
        y: Option<Vec<f64>>,
        domain: Domain,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if names.len() != p {
            return Err(Error::Schema(format!("{} names for {} columns", names.len(), p)));
        }
        if observed.shape() != (n, p) {
            return Err(Error::Schema("observation pattern shape differs from values".into()));
        }
        if let Some(y) = &y {
            if y.len() != n {
                return Err(Error::LengthMismatch { left: y.len(), right: n });
            }
        }
        let mut sorted = maskable.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != maskable.len() || sorted.iter().any(|&j| j >= p) {
            return Err(Error::Schema("invalid maskable column list".into()));
        }
        for j in 0..p {
            let is_maskable = maskable.contains(&j);
            for i in 0..n {
                if !observed[(i, j)] {
                    if !is_maskable {
                        return Err(Error::Schema(format!("column `{}` is not maskable but has NA", names[j])));
                    }
                    values[(i, j)] = f64::NAN;
                } else if !values[(i, j)].is_finite() {
                    return Err(Error::Invalid(format!("non-finite observed value in `{}` row {}", names[j], i)));
                }
            }
        }
        Ok(MaskedDataset {
            names,
            values,
            observed,
            maskable,
            y,
            domain,
        })
    }

    /// Build from optional cells; `None` is NA. Every column containing an NA
    /// is maskable, plus any listed in `extra_maskable`.
    pub fn from_cells(
        names: Vec<String>,
        rows: &[Vec<Option<f64>>],
        extra_maskable: &[usize],
        y: Option<Vec<f64>>,
        domain: Domain,
    ) -> Result<Self> {
        let p = names.len();
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::Schema(format!("row {bad} has {} cells, expected {p}", rows[bad].len())));
        }
        let values = DMatrix::from_fn(n, p, |i, j| rows[i][j].unwrap_or(f64::NAN));
        let observed = DMatrix::from_fn(n, p, |i, j| rows[i][j].is_some());
        let mut maskable: Vec<usize> = (0..p)
            .filter(|&j| extra_maskable.contains(&j) || (0..n).any(|i| !observed[(i, j)]))
            .collect();
        maskable.sort_unstable();
        Self::new(names, values, observed, maskable, y, domain)
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

    pub fn maskable(&self) -> &[usize] {
        &self.maskable
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[(i, j)]
    }

    pub fn observed_pattern(&self) -> &DMatrix<bool> {
        &self.observed
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.observed[(i, j)].then(|| self.values[(i, j)])
    }

    /// Raw storage (NaN at NA cells).
    pub fn raw_values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Indicator matrix R, n x |maskable|, 1 = observed.
    pub fn indicators(&self) -> DMatrix<u8> {
        DMatrix::from_fn(self.n(), self.maskable.len(), |i, k| self.observed[(i, self.maskable[k])] as u8)
    }

    pub fn observed_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.observed[(i, j)]).collect()
    }

    pub fn missing_rows(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.observed[(i, j)]).collect()
    }

    pub fn missing_count(&self, j: usize) -> usize {
        (0..self.n()).filter(|&i| !self.observed[(i, j)]).count()
    }

    /// Columns with at least one NA, in column order.
    pub fn incomplete_columns(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.missing_count(j) > 0).collect()
    }

    /// Fraction of NA cells over all covariate cells.
    pub fn missing_fraction(&self) -> f64 {
        let total = (self.n() * self.p()) as f64;
        self.observed.iter().filter(|o| !**o).count() as f64 / total
    }

    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n() {
            return Err(Error::LengthMismatch { left: y.len(), right: self.n() });
        }
        let mut out = self.clone();
        out.y = Some(y);
        Ok(out)
    }

    pub fn without_outcome(&self) -> Self {
        let mut out = self.clone();
        out.y = None;
        out
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }
}

pub const SIM_COLUMNS: [&str; 3] = ["X1", "X2", "X3"];

/// Blank every X2/X3 cell whose indicator is 0. X1 is never masked. The
/// outcome is carried along; drop it with [`MaskedDataset::without_outcome`].
pub fn apply_mask(complete: &CompleteDataset, domain: Domain) -> MaskedDataset {
    let n = complete.n();
    let observed = DMatrix::from_fn(n, 3, |i, j| j == 0 || complete.r[(i, j - 1)]);
    MaskedDataset::new(
        SIM_COLUMNS.iter().map(|s| s.to_string()).collect(),
        complete.x.clone(),
        observed,
        vec![1, 2],
        Some(complete.y.clone()),
        domain,
    )
    .expect("simulated data is well-formed")
}
