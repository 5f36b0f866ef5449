//! Factorial simulation runner, result persistence and reports, plus the
//! loaders used by the command-line tool.

mod cell;
mod config;
pub mod csvio;
mod external;
mod report;
mod runner;

pub use cell::{run_cell, CellStatus, SimCellResult};
pub use config::{CellSeeds, CellSpec, FactorialConfig, ImputerOverrides, Method};
pub use external::{apply_external, load_external_csv, ApplyResult, ColumnType, ExternalData, ExternalSchema};
pub use report::{build_report, emit_report, CurvePoint, Report, StratumSummary};
pub use runner::{
    config_hash, count_errors, load_results, run_factorial, run_in_memory, sort_results, Manifest, RunSummary,
    MANIFEST, PARTIAL_MARKER, RESULTS_CSV, RESULTS_JSONL,
};
