use std::process::ExitCode;

use clap::{Parser, Subcommand};
use isolab_cli::commands::run;
use isolab_cli::config::{read_file_config, resolve, FileConfig, Flags};
use isolab_cli::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "isolab", version, about = "Isomonodromy experiments for Painleve VI and V")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monodromy of a random P6 system
    Monodromy(Flags),
    /// Schlesinger flow of a random P6 state along t6
    Flow6(Flags),
    /// Isomonodromic flow of a random P5 state along t5
    Flow5(Flags),
    /// Stokes data of a random P5 system and its drift under the flow
    Stokes(Flags),
    /// Ladder of Schlesinger transformations at shrinking times
    Ladder(Flags),
    /// First degeneration limit: convergence, P5 residual, monodromy map
    Limit1(Flags),
    /// Second degeneration limit: convergence and monodromy map
    Limit2(Flags),
    /// Agreement of the two limits on matched bases
    Equivalence(Flags),
    /// Batch simultaneous triangularization from JSON lines
    Triangularize(Flags),
    /// Quick checks of every engine
    Selftest(Flags),
}

impl Command {
    fn split(self) -> (&'static str, Flags) {
        match self {
            Command::Monodromy(f) => ("monodromy", f),
            Command::Flow6(f) => ("flow6", f),
            Command::Flow5(f) => ("flow5", f),
            Command::Stokes(f) => ("stokes", f),
            Command::Ladder(f) => ("ladder", f),
            Command::Limit1(f) => ("limit1", f),
            Command::Limit2(f) => ("limit2", f),
            Command::Equivalence(f) => ("equivalence", f),
            Command::Triangularize(f) => ("triangularize", f),
            Command::Selftest(f) => ("selftest", f),
        }
    }
}

fn main_inner(cli: Cli) -> CliResult<String> {
    let (name, flags) = cli.command.split();
    let file = match &flags.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    let cfg = resolve(name, &flags, &file)?;
    if cfg.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    run(&cfg)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("isolab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
