//! Command-line front end: single runs, wait-time sweeps and config checks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use femtosim_core::metrics::{aggregate, Denominator, MetricsError, SweepSummary};
use femtosim_core::sweep::sweep;
use femtosim_core::{parse_config, run, serialize_config, ConfigError, SimConfig, SimError};

pub const RUNLOG_FILE: &str = "runlog.tsv";
pub const HANDOVERS_FILE: &str = "handovers.tsv";
pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("bad seed list {0:?}: use `A..B` (inclusive) or comma-separated integers")]
    Seeds(String),
    #[error("bad threshold time list {0:?}: use comma-separated non-negative seconds")]
    ThresholdTimes(String),
    #[error("writing output: {0}")]
    Output(#[from] io::Error),
}

#[derive(Debug, Parser)]
#[command(
    name = "femtosim",
    version,
    about = "Macrocell/femtocell handover simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one seed and write the event log, handover records and a summary row.
    Run(RunArgs),
    /// Repeat runs over admission wait times and seeds.
    Sweep(SweepArgs),
    /// Check a config file and report every problem in it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the default configuration.
    Defaults,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated wait times in seconds.
    #[arg(long, default_value = "0,10,20")]
    pub threshold_times: String,
    /// `A..B` inclusive, or a comma-separated list.
    #[arg(long, default_value = "1..20")]
    pub seeds: String,
    /// Overrides the offered call count per run.
    #[arg(long)]
    pub calls: Option<usize>,
    /// Count blocked admissions in the unnecessary-fraction denominator.
    #[arg(long)]
    pub include_blocked: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Seeds(text.to_string());
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..=b).collect::<Vec<_>>()
    } else {
        text.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

pub fn parse_threshold_times(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::ThresholdTimes(text.to_string());
    let ts = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if ts.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(bad());
    }
    Ok(ts)
}

pub fn load_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let Some(path) = path else {
        return Ok(SimConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text).map_err(|source| CliError::Config {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_owned(),
        source,
    })
}

fn denominator(include_blocked: bool) -> Denominator {
    if include_blocked {
        Denominator::IncludeBlocked
    } else {
        Denominator::AdmittedOnly
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            let log = run(&cfg)?;
            let summary = SweepSummary {
                rows: vec![aggregate(
                    std::slice::from_ref(&log),
                    cfg.fap_count,
                    Denominator::AdmittedOnly,
                )?],
            };
            prepare_dir(&args.out)?;
            write_file(&args.out.join(RUNLOG_FILE), log.to_tsv().as_bytes())?;
            write_file(&args.out.join(HANDOVERS_FILE), log.records_tsv().as_bytes())?;
            write_file(
                &args.out.join(SWEEP_FILE),
                summary.to_csv_string().as_bytes(),
            )?;
            write!(out, "{}", summary.to_table())?;
        }
        Command::Sweep(args) => {
            let mut cfg = load_config(args.config.as_deref())?;
            if let Some(calls) = args.calls {
                cfg.offered_calls = calls;
            }
            let times = parse_threshold_times(&args.threshold_times)?;
            let seeds = parse_seeds(&args.seeds)?;
            let outcome = sweep(&cfg, &times, &seeds, denominator(args.include_blocked))?;
            prepare_dir(&args.out)?;
            write_file(
                &args.out.join(SWEEP_FILE),
                outcome.summary.to_csv_string().as_bytes(),
            )?;
            write!(out, "{}", outcome.summary.to_table())?;
        }
        Command::Validate { config } => {
            load_config(Some(&config))?;
            writeln!(out, "{}: ok", config.display())?;
        }
        Command::Defaults => write!(out, "{}", serialize_config(&SimConfig::default()))?,
    }
    Ok(())
}
