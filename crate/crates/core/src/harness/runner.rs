use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cell::{run_cell, CellStatus, SimCellResult};
use super::config::FactorialConfig;
use crate::error::{Error, Result};

pub const RESULTS_JSONL: &str = "results.jsonl";
pub const RESULTS_CSV: &str = "results.csv";
pub const MANIFEST: &str = "manifest.json";
/// Present while a run is writing; left behind if it aborts.
pub const PARTIAL_MARKER: &str = "RUN_INCOMPLETE";

const SHIFT_CONVENTION: &str = "source and target share covariate and outcome equations; target missingness \
coefficients are redrawn; indicator intercepts calibrated to source_miss_anchor (source) and miss_pct (target); \
covariate_shift offsets the target covariate intercepts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: FactorialConfig,
    pub config_sha256: String,
    pub shift_convention: String,
    pub jobs: usize,
    pub cells: usize,
    pub rows: usize,
    pub ok_rows: usize,
    pub error_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: usize,
    pub ok_rows: usize,
    pub error_rows: usize,
}

pub fn config_hash(cfg: &FactorialConfig) -> Result<String> {
    let canonical = serde_json::to_string(cfg)?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// Run every cell on a pool of `jobs` threads, streaming rows to
/// `results.jsonl` and `results.csv` in completion order.
pub fn run_factorial(cfg: &FactorialConfig, jobs: usize, out_dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    if jobs < 1 {
        return Err(Error::Config("jobs must be at least 1".into()));
    }
    fs::create_dir_all(out_dir)?;
    let marker = out_dir.join(PARTIAL_MARKER);
    fs::write(&marker, "run in progress or aborted\n")?;

    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (tx, rx) = mpsc::channel::<Vec<SimCellResult>>();

    let (written, ok_rows) = std::thread::scope(|scope| -> Result<(usize, usize)> {
        let writer = scope.spawn(|| write_rows(rx, out_dir));
        pool.install(|| {
            cells.par_iter().for_each_with(tx, |tx, cell| {
                // a closed channel means the writer failed; its error is reported below
                let _ = tx.send(run_cell(cell, cfg));
            });
        });
        writer.join().expect("writer thread panicked")
    })?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        config_sha256: config_hash(cfg)?,
        shift_convention: SHIFT_CONVENTION.to_string(),
        jobs,
        cells: cells.len(),
        rows: written,
        ok_rows,
        error_rows: written - ok_rows,
    };
    fs::write(out_dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    fs::remove_file(&marker)?;
    Ok(RunSummary {
        out_dir: out_dir.to_path_buf(),
        rows: written,
        ok_rows,
        error_rows: written - ok_rows,
    })
}

fn write_rows(rx: mpsc::Receiver<Vec<SimCellResult>>, out_dir: &Path) -> Result<(usize, usize)> {
    let mut jsonl = BufWriter::new(File::create(out_dir.join(RESULTS_JSONL))?);
    let mut csv = csv::Writer::from_path(out_dir.join(RESULTS_CSV))?;
    csv.write_record(CSV_HEADER)?;
    let (mut rows, mut ok) = (0, 0);
    for batch in rx {
        for r in batch {
            serde_json::to_writer(&mut jsonl, &r)?;
            jsonl.write_all(b"\n")?;
            csv.write_record(csv_record(&r))?;
            rows += 1;
            ok += r.is_ok() as usize;
        }
    }
    jsonl.flush()?;
    csv.flush()?;
    Ok((rows, ok))
}

const CSV_HEADER: [&str; 15] = [
    "n",
    "target_prop",
    "miss_pct",
    "dag",
    "nonlinearity",
    "method",
    "rep",
    "seed",
    "status",
    "target_rmse",
    "imp_rmse_source",
    "imp_rmse_target",
    "runtime_ms",
    "leak_reads",
    "error",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, |x| x.to_string())
}

fn csv_record(r: &SimCellResult) -> Vec<String> {
    vec![
        r.n.to_string(),
        r.target_prop.to_string(),
        r.miss_pct.to_string(),
        r.dag.to_string(),
        r.nonlinearity.to_string(),
        r.method.as_str().to_string(),
        r.rep.to_string(),
        r.seed.to_string(),
        r.status.as_str().to_string(),
        opt(&r.target_rmse),
        opt(&r.imp_rmse_source),
        opt(&r.imp_rmse_target),
        opt(&r.runtime_ms),
        r.leak_reads.to_string(),
        opt(&r.error),
    ]
}

/// Read a results file and sort rows by cell id and method.
pub fn load_results(path: &Path) -> Result<Vec<SimCellResult>> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str::<SimCellResult>(&line)?);
        }
    }
    sort_results(&mut rows);
    Ok(rows)
}

pub fn sort_results(rows: &mut [SimCellResult]) {
    rows.sort_by_cached_key(|r| r.key());
}

/// Run cells in-process without touching the filesystem (rows sorted).
pub fn run_in_memory(cfg: &FactorialConfig, jobs: usize) -> Result<Vec<SimCellResult>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<SimCellResult> =
        pool.install(|| cfg.cells().par_iter().flat_map_iter(|c| run_cell(c, cfg)).collect());
    sort_results(&mut rows);
    Ok(rows)
}

pub fn count_errors(rows: &[SimCellResult]) -> usize {
    rows.iter().filter(|r| r.status != CellStatus::Ok).count()
}
