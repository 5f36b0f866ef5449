//! Small exact or Monte Carlo checks of the identities the adaptation
//! pipeline relies on: the observed-data conditional under missingness
//! shift, the squared-error decomposition over missingness strata, and
//! complete-case identifiability.

mod decomposition;
mod joint;
mod verify;

pub use decomposition::{complete_case_fit, mse_decomposition, MseDecomposition};
pub use joint::{
    conditional_shift_distance, observed_conditional, random_mar_pair, self_censoring_pair, CondCell, DiscreteJoint,
    ObservedConditional, ObservedKey, Tuple, MAX_LEVELS, MAX_UNOBSERVED,
};
pub use verify::{complete_case_experiment, run_suite, CompleteCaseExperiment, VerifyCheck};
