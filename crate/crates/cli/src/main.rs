use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use shiftlab::adapt::{
    fit_domain_classifier, fit_weighted_outcome, importance_weights, predict_target, OutcomeKind, WeightOptions,
};
use shiftlab::harness::{
    apply_external, count_errors, csvio, emit_report, load_external_csv, load_results, run_factorial,
    ExternalSchema, FactorialConfig, ImputerOverrides, Method, RESULTS_JSONL,
};
use shiftlab::impute::impute;
use shiftlab::metrics::rmse;
use shiftlab::simgen::{build_shift, split_domains, DagSpec, Domain, OutcomeAccess, ShiftRecipe, SIM_COLUMNS};
use shiftlab::theory::run_suite;

#[derive(Parser)]
#[command(name = "shiftlab", version, about = "Imputation and importance weighting under missingness shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one source/target pair and write it as CSV.
    Generate {
        #[arg(long, default_value_t = 1)]
        dag: u8,
        #[arg(long, default_value_t = 1)]
        nonlinearity: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        target_prop: f64,
        /// Target missingness rate.
        #[arg(long, default_value_t = 0.3)]
        miss: f64,
        #[arg(long, default_value_t = 0.05)]
        source_miss: f64,
        #[arg(long, default_value_t = 0.0)]
        covariate_shift: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Impute the NA cells of one CSV file.
    Impute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "mice_pmm")]
        method: String,
        /// Outcome column (read by outcome-aware imputers, copied to the output).
        #[arg(long)]
        outcome: Option<String>,
        #[arg(long, default_value = "source")]
        domain: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the domain classifier and the weighted outcome model on imputed
    /// files and predict the target.
    Adapt {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value = "Y")]
        outcome: String,
        /// Target file with the true outcome column, for evaluation.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        logistic: bool,
        #[arg(long)]
        clip_quantile: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a factorial simulation from a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_errors: bool,
    },
    /// Summarize a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact enumeration and complete-case checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline on a two-domain CSV described by a schema file.
    Apply {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, default_value = "mice_pmm")]
        method: String,
        #[arg(long)]
        clip_quantile: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            dag,
            nonlinearity,
            n,
            target_prop,
            miss,
            source_miss,
            covariate_shift,
            seed,
            out,
        } => {
            let dag = DagSpec::new(dag)?;
            let recipe = ShiftRecipe {
                source_rate: source_miss,
                target_rate: miss,
                redraw_target_missingness: true,
                covariate_offset: covariate_shift,
            };
            let root = shiftlab::rng::SeedTree::new(seed);
            let shift = build_shift(&dag, nonlinearity, &recipe, root.child("params").value(), root.child("mask").value())?;
            let split = split_domains(n, target_prop, &shift, root.child("data").value())?;
            fs::create_dir_all(&out)?;
            csvio::write_masked_csv(&out.join("source.csv"), &split.source, "Y")?;
            csvio::write_masked_csv(&out.join("target.csv"), &split.target, "Y")?;
            let truth = &split.target_truth;
            let x = truth.covariates();
            let cols: Vec<Vec<f64>> = (0..3).map(|j| x.column(j).iter().copied().collect()).collect();
            let y = truth.outcome(OutcomeAccess::Metrics);
            let mut header: Vec<&str> = SIM_COLUMNS.to_vec();
            header.push("Y");
            csvio::write_columns(&out.join("target_truth.csv"), &header, &[&cols[0], &cols[1], &cols[2], y])?;
            fs::write(out.join("shift.json"), serde_json::to_string_pretty(&shift)?)?;
            println!(
                "wrote {} source and {} target rows to {} (missing: source {:.3}, target {:.3})",
                split.source.n(),
                split.target.n(),
                out.display(),
                split.source.missing_fraction(),
                split.target.missing_fraction()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Impute {
            input,
            method,
            outcome,
            domain,
            seed,
            out,
        } => {
            let method = Method::parse(&method)?;
            let Some(cfg) = method.imputer(&ImputerOverrides::default()) else {
                bail!("the oracle needs the true values and cannot impute a file");
            };
            let domain = Domain::parse(&domain)?;
            let ds = csvio::read_masked_csv(&input, outcome.as_deref(), domain)
                .with_context(|| format!("reading {}", input.display()))?;
            let imputed = impute(&ds, &cfg, seed)?;
            let y = outcome.as_deref().zip(ds.outcome());
            csvio::write_imputed_csv(&out, &imputed, y)?;
            println!("imputed {} rows with {} -> {}", ds.n(), cfg.label(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Adapt {
            source,
            target,
            outcome,
            truth,
            logistic,
            clip_quantile,
            out,
        } => {
            let (src, y) = csvio::read_imputed_csv(&source, Some(&outcome))?;
            let y = y.with_context(|| format!("source file has no `{outcome}` column"))?;
            let (tgt, _) = csvio::read_imputed_csv(&target, Some(&outcome))?;
            let clf = fit_domain_classifier(&src, &tgt)?;
            let w = importance_weights(&clf, &src, &WeightOptions { clip_quantile })?;
            let kind = if logistic { OutcomeKind::Logistic } else { OutcomeKind::Linear };
            let model = fit_weighted_outcome(&src, &y, Some(&w), kind)?;
            let pred = predict_target(&model, &tgt)?;
            fs::create_dir_all(&out)?;
            csvio::write_columns(&out.join("predictions.csv"), &["prediction"], &[&pred])?;
            csvio::write_columns(&out.join("weights.csv"), &["weight"], &[&w])?;
            let mut summary = serde_json::json!({ "classifier": clf, "outcome_model": model });
            if let Some(path) = truth {
                let labels = csvio::CsvTable::read(&path)?.complete_column(&outcome)?;
                let e = rmse(&pred, &labels)?;
                summary["target_rmse"] = serde_json::json!(e);
                println!("target RMSE {e:.4}");
            }
            fs::write(out.join("model.json"), serde_json::to_string_pretty(&summary)?)?;
            println!("wrote predictions for {} target rows to {}", pred.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            seed,
            jobs,
            out,
            allow_errors,
        } => {
            let mut cfg = FactorialConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let summary = run_factorial(&cfg, jobs, &out)?;
            println!(
                "{} rows ({} ok, {} errors) written to {}",
                summary.rows,
                summary.ok_rows,
                summary.error_rows,
                out.display()
            );
            if summary.error_rows > 0 && !allow_errors {
                eprintln!("{} rows have error status (use --allow-errors to accept)", summary.error_rows);
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { results, out } => {
            let path = if results.is_dir() { results.join(RESULTS_JSONL) } else { results };
            let rows = load_results(&path)?;
            let report = emit_report(&rows, &out)?;
            println!("{:<16} {:>6} {:>6} {:>10} {:>10}", "method", "rows", "ok", "mean_rmse", "median");
            for s in &report.by_method {
                println!(
                    "{:<16} {:>6} {:>6} {:>10.4} {:>10.4}",
                    s.method,
                    s.rows,
                    s.ok,
                    s.mean_target_rmse.unwrap_or(f64::NAN),
                    s.q50_target_rmse.unwrap_or(f64::NAN)
                );
            }
            println!("{} error rows; summaries written to {}", count_errors(&rows), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed, out } => {
            let checks = run_suite(seed)?;
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {:<48} measured {:.3e} (need {})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.threshold
                );
                failed += !c.passed as usize;
            }
            if let Some(path) = out {
                fs::write(path, serde_json::to_string_pretty(&checks)?)?;
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Apply {
            data,
            schema,
            method,
            clip_quantile,
            seed,
            out,
        } => {
            let schema = ExternalSchema::load(&schema)?;
            let ext = load_external_csv(&data, &schema)?;
            println!(
                "source `{}`: {} rows, {:.1}% missing; target `{}`: {} rows, {:.1}% missing",
                ext.source_level,
                ext.source.n(),
                100.0 * ext.source_missing_rate,
                ext.target_level,
                ext.target.n(),
                100.0 * ext.target_missing_rate
            );
            if let Some(p) = ext.prevalence {
                println!("outcome prevalence {:.2}%", 100.0 * p);
            }
            let method = Method::parse(&method)?;
            let Some(cfg) = method.imputer(&ImputerOverrides::default()) else {
                bail!("the oracle is not available for external data");
            };
            let res = apply_external(&ext, &cfg, &WeightOptions { clip_quantile }, seed)?;
            fs::create_dir_all(&out)?;
            csvio::write_columns(
                &out.join("predictions.csv"),
                &["prediction", "unweighted_prediction", "label"],
                &[&res.predictions, &res.unweighted_predictions, &ext.target_labels],
            )?;
            fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&res)?)?;
            match (res.brier, res.auroc) {
                (Some(b), a) => println!(
                    "weighted: Brier {b:.4}, AUROC {}; unweighted: Brier {:.4}",
                    a.map_or("n/a".into(), |v| format!("{v:.4}")),
                    res.unweighted_brier.unwrap_or(f64::NAN)
                ),
                _ => println!("weighted RMSE {:.4}; unweighted RMSE {:.4}", res.rmse, res.unweighted_rmse),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
