//! Command-line front end: configuration, subcommands and output writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "aggar", version, about = "Aggregated random-coefficient AR(1) panels: simulation, limits, disaggregation")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration by name (see `aggar presets`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Overrides the configured master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one aggregated series.
    Simulate,
    /// Theoretical covariance, marginal log-cf and regime.
    Theory,
    /// Partial-sum scaling experiment.
    Scaling,
    /// Estimate the mixing density from a series.
    Disagg {
        /// Also write the Gram matrix under the printed normalizer constant.
        #[arg(long)]
        normalizer_diagnostic: bool,
    },
    /// MISE over a (q, K) grid.
    Mise,
    /// List built-in presets.
    Presets,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => config::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        // A second call in the same process (tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if let Command::Presets = cli.command {
        for (name, _) in config::PRESETS {
            println!("{name}");
        }
        return Ok(());
    }
    let cfg = resolve_config(cli)?;
    let written = match &cli.command {
        Command::Simulate => commands::simulate(&cfg, &cli.out)?,
        Command::Theory => commands::theory(&cfg, &cli.out)?,
        Command::Scaling => commands::scaling(&cfg, &cli.out)?,
        Command::Disagg { normalizer_diagnostic } => commands::disagg(&cfg, &cli.out, *normalizer_diagnostic)?,
        Command::Mise => commands::mise(&cfg, &cli.out)?,
        Command::ShowConfig => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Presets => unreachable!(),
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
