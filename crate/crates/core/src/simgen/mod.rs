//! Synthetic data from the structural equations of the eight simulation
//! graphs: parameter draws, generation, missingness calibration, masking and
//! the source/target split.

mod dag;
mod generate;
mod mask;
mod meanfn;
mod params;
mod split;
mod toy;

pub use dag::DagSpec;
pub use generate::{
    calibrate_missingness_intercept, calibrate_with_rows, generate, CompleteDataset, CALIBRATION_BRACKET,
    CALIBRATION_ROWS,
};
pub use mask::{apply_mask, Domain, MaskedDataset, SIM_COLUMNS};
pub use meanfn::{Layer, MeanFn, MeanKind};
pub use params::{
    check_nonlinearity, redraw_missingness, sample_params, sample_params_scaled, StructuralParams,
    DEFAULT_COEF_SCALE, NONLINEARITY_LEVELS,
};
pub use split::{
    build_shift, domain_sizes, split_domains, DomainSplit, OutcomeAccess, ShiftConfig, ShiftRecipe, TargetTruth,
};
pub use toy::{CovariateShiftToy, ToySample};
