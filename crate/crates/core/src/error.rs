use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot calibrate missingness intercept for indicator {indicator}: target rate {target} outside [{lo:.4}, {hi:.4}] reachable on the bracket")]
    Calibration {
        indicator: String,
        target: f64,
        lo: f64,
        hi: f64,
    },

    #[error("column `{column}` has no observed values")]
    FullyMissing { column: String },

    #[error("column `{column}`: {donors} donors requested but only {observed} observed rows")]
    TooFewDonors {
        column: String,
        donors: usize,
        observed: usize,
    },

    #[error("singular system in {context}")]
    Singular { context: String },

    #[error("logistic fit did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("perfect separation detected at iteration {iteration} (max |coef| {max_coef:.3e})")]
    Separation { iteration: usize, max_coef: f64 },

    #[error("sampler diverged at iteration {iteration}: {what}")]
    Sampler { iteration: usize, what: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("predicted target probability is numerically 1 for source row {row}; enable clipping")]
    NumericallyOne { row: usize },

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(String),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Toml(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Toml(e.to_string())
    }
}
