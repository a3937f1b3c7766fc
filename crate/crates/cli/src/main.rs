use std::process::ExitCode;

use clap::Parser;
use sfg_cli::{run, Cli, CliError};
use sfg_core::parallel::with_threads;

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("SFG_SIM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "SFG_SIM_THREADS must be a non-negative integer, got `{v}`"
            ))
        }),
        _ => Ok(0),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = threads_from_env().and_then(|threads| {
        with_threads(threads, || {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            run(&cli, &mut lock)
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("sfg-sim: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
