use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::RunConfig;
use error::CliError;

/// Environment variable selecting the worker thread count; 0 or unset means
/// one per core.
const THREADS_ENV: &str = "CODIM_MPM_THREADS";

#[derive(Parser)]
#[command(name = "codim-mpm", version, about = "Codimensional cloth MPM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set sim.substeps=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output.dir`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the cloth and write one mesh per frame plus a run manifest.
    Simulate(Common),
    /// Fit (E, rho, alpha) to a target sequence.
    Fit(Common),
    /// Compare a simulated sequence against a reference.
    Eval(Common),
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Config {
        message: format!("{THREADS_ENV} must be a nonnegative integer, got `{raw}`"),
        path: None,
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    init_threads()?;
    let (common, cmd): (&Common, fn(&RunConfig) -> Result<PathBuf, CliError>) = match &cli.command {
        Command::Simulate(c) => (c, commands::simulate),
        Command::Fit(c) => (c, commands::fit),
        Command::Eval(c) => (c, commands::eval),
    };
    let mut cfg = RunConfig::load(&common.config, &common.overrides)?;
    if let Some(dir) = &common.output {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
