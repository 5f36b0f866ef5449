use nalgebra::DMatrix;

use super::{check_no_fully_missing, observed_means, ImputedDataset, ImputerConfig};
use crate::error::Result;
use crate::simgen::MaskedDataset;

/// Replace every NA with its column's observed mean.
pub fn impute_mean(ds: &MaskedDataset) -> Result<ImputedDataset> {
    check_no_fully_missing(ds)?;
    let means = observed_means(ds);
    let filled = DMatrix::from_fn(ds.n(), ds.p(), |_, j| means[j]);
    ImputedDataset::from_masked(ds, filled, ImputerConfig::mean())
}
