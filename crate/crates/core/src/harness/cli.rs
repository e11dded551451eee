//! Command-line entry points.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use super::config::ExperimentConfig;
use super::report::{export, write_atomic, ReportTable};
use super::run::run_all;
use crate::error::{Error, Result};
use crate::isolation::{emit_curves, write_curves_csv, write_curves_file};

pub const OUT_ENV: &str = "UNLEARN_BENCH_OUT";
pub const DEFAULT_OUT: &str = "unlearn-bench-out";

#[derive(Debug, Parser)]
#[command(
    name = "unlearn-bench",
    version,
    about = "Deletion-test benchmark for inexact unlearning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every seed of an experiment and write its reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Added to every configured seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Seeds evaluated in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory (overrides `output_dir` and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit isolation cost curves as CSV.
    Isolation {
        /// Comma-separated part counts.
        #[arg(long, value_delimiter = ',', required = true)]
        parts: Vec<u64>,
        #[arg(long)]
        n_max: u64,
        #[arg(long, default_value_t = 1)]
        step: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run an experiment once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `key=v1,v2,...`
        #[arg(long)]
        vary: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(cli: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Loads the dataset and checks the architecture before any training.
fn prepare(config: &ExperimentConfig) -> Result<crate::data::LabeledDataset> {
    let data = config.dataset.load()?;
    config.arch(data.dim(), data.num_classes())?;
    Ok(data)
}

pub fn cmd_run(
    config_path: &Path,
    seed_offset: u64,
    jobs: usize,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let config = ExperimentConfig::from_file(config_path)?;
    let data = prepare(&config)?;
    let records = run_all(&config, &data, seed_offset, jobs)?;
    let dir = output_dir(out, &config);
    let table = export(&config, &records, &dir)?;
    log::info!("wrote {} rows to {}", table.rows.len(), dir.display());
    Ok(dir)
}

pub fn cmd_isolation(parts: &[u64], n_max: u64, step: u64, out: Option<&Path>) -> Result<()> {
    let points = emit_curves(parts, n_max, step)?;
    match out {
        Some(path) => write_curves_file(&points, path),
        None => write_curves_csv(&points, std::io::stdout().lock()).map_err(Error::from),
    }
}

/// Splits `key=v1,v2` into the key and its values.
pub fn parse_vary(vary: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = vary
        .split_once('=')
        .ok_or_else(|| Error::config(format!("--vary expects key=v1,v2,..., got {vary:?}")))?;
    let values: Vec<String> = values
        .split(',')
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::config(format!("--vary {key}: no values")));
    }
    Ok((key.trim().to_string(), values))
}

/// Runs one experiment per value into `<out>/<key>=<value>/` and writes a
/// combined `sweep.csv`. Every variant is validated before anything runs.
pub fn cmd_sweep(
    config_path: &Path,
    vary: &str,
    jobs: usize,
    out: Option<&Path>,
) -> Result<PathBuf> {
    let base = ExperimentConfig::from_file(config_path)?;
    let (key, values) = parse_vary(vary)?;
    let variants = values
        .iter()
        .map(|v| base.with_override(&key, v))
        .collect::<Result<Vec<_>>>()?;
    let datasets = variants.iter().map(prepare).collect::<Result<Vec<_>>>()?;
    let dir = output_dir(out, &base);

    let mut tables: Vec<(String, ReportTable)> = Vec::new();
    for ((value, config), data) in values.iter().zip(&variants).zip(&datasets) {
        let records = run_all(config, data, 0, jobs)?;
        let table = export(config, &records, &dir.join(format!("{key}={value}")))?;
        tables.push((value.clone(), table));
    }
    write_atomic(&dir.join("sweep.csv"), sweep_csv(&key, &tables).as_bytes())?;
    Ok(dir)
}

/// Long-format comparison: one line per (value, method, column).
pub fn sweep_csv(key: &str, tables: &[(String, ReportTable)]) -> String {
    let mut out = String::from("key,value,method,n_seeds,metric,target,mean,std\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (value, table) in tables {
        for row in &table.rows {
            for (cell, (m, t)) in row.cells.iter().zip(&table.columns) {
                let _ = writeln!(
                    out,
                    "{key},{value},{},{},{},{},{},{}",
                    row.label,
                    row.n_seeds,
                    m.name(),
                    t.name(),
                    opt(cell.mean),
                    opt(cell.std)
                );
            }
        }
    }
    out
}

/// Runs the parsed command line.
pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed_offset,
            jobs,
            out,
        } => cmd_run(&config, seed_offset, jobs, out.as_deref()).map(|dir| {
            println!("{}", dir.display());
        }),
        Command::Isolation {
            parts,
            n_max,
            step,
            out,
        } => cmd_isolation(&parts, n_max, step, out.as_deref()),
        Command::Sweep {
            config,
            vary,
            jobs,
            out,
        } => cmd_sweep(&config, &vary, jobs, out.as_deref()).map(|dir| {
            println!("{}", dir.display());
        }),
    }
}
