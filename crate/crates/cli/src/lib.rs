//! Command-line driver for the hybrid beamforming simulators.
//!
//! `link` runs link-level trials, A/B comparisons or trajectory tests,
//! `system` runs the multi-cell rate evaluation and `selftest` the fast
//! invariant checks. Configuration errors exit with status 2, runtime
//! failures with status 1.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hbfsim", version, about = "Hybrid beamforming link and system simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Master seed; overrides the file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `run.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides `run.workers`.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Link-level trials, A/B comparison or trajectory tracking.
    Link {
        #[command(flatten)]
        common: CommonArgs,
        /// Subframes per trial; overrides `run.subframes`.
        #[arg(long)]
        subframes: Option<usize>,
    },
    /// Multi-cell downlink rate evaluation.
    System {
        #[command(flatten)]
        common: CommonArgs,
        /// Independent user drops; overrides `run.drops`.
        #[arg(long)]
        drops: Option<usize>,
    },
    /// Fast invariant checks.
    Selftest {
        #[arg(long, hide = true, value_enum)]
        inject_fault: Option<commands::Fault>,
    },
}

fn resolve(common: &CommonArgs, subframes: Option<usize>, drops: Option<usize>) -> Result<config::Resolved, CliError> {
    let cfg = match &common.scenario {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.resolve(&Overrides {
        seed: common.seed,
        subframes,
        drops,
        out: common.out.clone(),
        workers: common.workers,
    })
}

/// Executes one command and returns the process exit status.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Link { common, subframes } => {
            let r = resolve(&common, subframes, None)?;
            let s = commands::cmd_link(&r)?;
            println!(
                "link: {} trial(s), mean SNR {:.2} dB, output in {}",
                s.trials.len(),
                s.mean_snr_db,
                r.config.run.out.display()
            );
            if let Some(g) = s.mean_gain_db {
                println!("mean gain {g:.2} dB over the single element");
            }
            Ok(0)
        }
        Command::System { common, drops } => {
            let r = resolve(&common, None, drops)?;
            let s = commands::cmd_system(&r)?;
            for v in &s.variants {
                println!("{:<20} mean {:>7.2} Mbps", v.system, v.mean_bps / 1e6);
            }
            println!("output in {}", r.config.run.out.display());
            Ok(0)
        }
        Command::Selftest { inject_fault } => {
            let results = commands::cmd_selftest(inject_fault);
            print!("{}", commands::format_checks(&results));
            Ok(if results.iter().all(|c| c.pass) { 0 } else { 1 })
        }
    }
}
