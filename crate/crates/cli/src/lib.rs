//! Command-line pipeline around `atlas-core`: dataset synthesis, training,
//! meshing, watertightness and metrics, with a flat TOML config and binary
//! checkpoints.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

use std::io::Write;
use std::path::PathBuf;

use clap::Parser;

pub use commands::{run, Command};
pub use config::Config;
pub use error::{CheckpointError, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "atlas", version, about = "Watertight meshes from point clouds with a locally conditioned atlas")]
#[command(after_help = config::keys_help())]
pub struct Cli {
    /// TOML config file; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. `--set b_lambda=0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Worker threads for parallel regions (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Print the effective config as TOML and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if the pool was already built, which leaves it usable.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cfg = Config::load(cli.config.as_deref(), &cli.overrides)?;
    if cli.dump_config {
        return write!(out, "{}", cfg.dump()).map_err(|e| CliError::io("<stdout>", e));
    }
    match &cli.command {
        Some(command) => run(command, &cfg, out),
        None => Err(CliError::Usage("no command given; see --help".into())),
    }
}
