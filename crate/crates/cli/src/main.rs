mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};

/// Size the global pool from `PEDFLOW_THREADS` (unset or 0 means all cores).
fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("PEDFLOW_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("PEDFLOW_THREADS must be a non-negative integer, got '{raw}'")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Compare(a) => commands::compare_runs(&a),
        Command::Hypmap(a) => commands::hypmap(&a),
        Command::ListScenarios => {
            commands::list_scenarios();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
