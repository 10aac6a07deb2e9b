//! Command-line front end: configuration, experiment runners and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod error;
pub mod report;
pub mod toy;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::{Benchmark, ExperimentConfig, Scale};
use crate::error::{CliError, CliResult};
use crate::report::{certify_csv, write_report, write_run_json, Report};

#[derive(Debug, Parser)]
#[command(
    name = "opinfer",
    version,
    about = "Operator inference with re-projection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Linear toy system
    Toy,
    /// Viscous Burgers' equation
    Burgers,
    /// Chafee-Infante equation
    Chafee,
    /// Two-dimensional reaction-diffusion equation
    Reaction2d,
    /// Recovery certificates of the re-projected data only
    Certify,
    /// Benchmark named in the config file
    Run,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Options {
    /// JSON file overriding the preset
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub scale: Option<Scale>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn benchmark(self) -> Option<Benchmark> {
        match self {
            Command::Toy => Some(Benchmark::Toy),
            Command::Burgers => Some(Benchmark::Burgers),
            Command::Chafee => Some(Benchmark::Chafee),
            Command::Reaction2d => Some(Benchmark::Reaction2d),
            Command::Certify | Command::Run => None,
        }
    }
}

pub fn resolve_config(command: Command, options: &Options) -> CliResult<ExperimentConfig> {
    let benchmark = command.benchmark();
    if benchmark.is_none() && options.config.is_none() {
        return Err(CliError::Config("this command needs --config".into()));
    }
    let mut config = ExperimentConfig::load(options.config.as_deref(), benchmark, options.scale)?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(out) = &options.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

/// Runs `command` and writes its outputs. Returns the report together with
/// the directory it was written to.
pub fn execute(command: Command, options: &Options) -> CliResult<(PathBuf, Report)> {
    let config = resolve_config(command, options)?;
    let dir = config.output_dir();
    let start = Instant::now();
    let report = if command == Command::Certify {
        let report = match config.benchmark {
            Benchmark::Toy => toy::certify_toy(&config)?,
            _ => bench::certify_benchmark(&config)?,
        };
        std::fs::create_dir_all(&dir)?;
        std::fs::write(
            dir.join("certify.csv"),
            certify_csv(report.benchmark, &report.certificates),
        )?;
        write_run_json(&dir, &config, &report, start.elapsed().as_secs_f64())?;
        report
    } else {
        let report = match config.benchmark {
            Benchmark::Toy => toy::run_toy(&config)?,
            _ => bench::run_benchmark(&config)?,
        };
        write_report(&dir, &config, &report, start.elapsed().as_secs_f64())?;
        report
    };
    let unsatisfied = report.unsatisfied_certificates();
    if config.require_exact_recovery && unsatisfied > 0 {
        return Err(CliError::Numerical(format!(
            "{unsatisfied} recovery certificates not satisfied"
        )));
    }
    Ok((dir, report))
}
