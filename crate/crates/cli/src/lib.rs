//! Command-line front end: argument parsing, configuration and report output.

pub mod angle;
pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CliError, CliResult};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "geotraj", version, about = "Trajectory-corrected geometric gates: synthesis, robustness scans and device simulation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel scans.
    #[arg(long, global = true, env = "GEOTRAJ_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the pulse schedule of a trajectory-corrected gate.
    Synth(commands::SynthArgs),
    /// Geometric vs conventional error sensitivity.
    Scan(commands::ScanArgs),
    /// Waypoint landscape and optimum.
    Optimize(commands::OptimizeArgs),
    /// Open-system transmon sweep over the peak drive.
    Transmon(commands::TransmonArgs),
    /// Two-transmon gate: effective sensitivity and (nu, beta) fidelity map.
    Twoqubit(commands::TwoQubitArgs),
    /// Every figure recipe in one go.
    Report(commands::ReportArgs),
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Usage)?,
        None => RunConfig::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Synth(a) => commands::cmd_synth(a, &cfg),
        Command::Scan(a) => commands::cmd_scan(a, &cfg),
        Command::Optimize(a) => commands::cmd_optimize(a, &cfg),
        Command::Transmon(a) => commands::cmd_transmon(a, &cfg),
        Command::Twoqubit(a) => commands::cmd_twoqubit(a, &cfg),
        Command::Report(a) => commands::cmd_report(a, &cfg),
    }
}
