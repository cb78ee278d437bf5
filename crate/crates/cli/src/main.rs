#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod error;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use error::CliError;

/// Worker-pool size; defaults to the available parallelism.
const THREADS_VAR: &str = "FEPLS_NUM_THREADS";

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::validation(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::validation(format!("cannot start {n} worker threads: {e}")))
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::try_parse() {
        Ok(cli) => configure_threads().and_then(|()| commands::run(cli)),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            Ok(())
        }
        Err(e) => {
            let _ = e.print();
            Err(CliError::Usage(e.kind().to_string()))
        }
    };
    if let Err(e) = result {
        if !matches!(e, CliError::Usage(_)) {
            eprintln!("error: {e}");
        }
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
