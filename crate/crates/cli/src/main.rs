mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;

/// LQG-optimal event-based sampling: design, trigger bounds and trade-offs.
#[derive(Parser)]
#[command(name = "evsample", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for JSON/CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Master seed for the Monte Carlo runs (overrides [sim] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// LQG design, reset system and γ₀ (writes design.json).
    Design,
    /// Optimal trigger bound: closed-form ellipsoid for A = 0, grid solve otherwise.
    Bound,
    /// Cost versus average sampling period (writes tradeoff.csv).
    Tradeoff,
    /// Periodic/event cost slopes and their ratio for an A = 0 system.
    Ratio,
}

fn run(cli: &Cli) -> Result<(), error::CliError> {
    let path =
        cli.config.as_ref().ok_or_else(|| error::CliError::Usage("--config <path> is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let ctx = Ctx { out: cli.out.clone(), seed: cli.seed, quiet: cli.quiet };
    match cli.command {
        Command::Design => commands::design(&cfg, &ctx),
        Command::Bound => commands::bound(&cfg, &ctx),
        Command::Tradeoff => commands::tradeoff(&cfg, &ctx),
        Command::Ratio => commands::ratio(&cfg, &ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
