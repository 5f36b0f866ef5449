//! Domain adaptation under MNAR missingness shift.
//!
//! The crate simulates source/target data from structural causal models with
//! self-censoring missingness, imputes the masked covariates in each domain
//! separately, corrects the remaining covariate and missingness shift with
//! classifier-based importance weights, and evaluates target predictions.
//! The [`theory`] module checks the underlying identities by exact
//! enumeration.

pub mod adapt;
pub mod error;
pub mod harness;
pub mod impute;
pub mod linalg;
pub mod metrics;
pub mod numeric;
pub mod rng;
pub mod simgen;
pub mod theory;

pub use error::{Error, Result};
