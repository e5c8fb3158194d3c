use std::process::ExitCode;

use clap::Parser;
use sffnet_cli::commands::{run, Cli};

/// Sizes the global rayon pool from `SFFNET_THREADS` when set.
fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SFFNET_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("SFFNET_THREADS must be a positive integer, got `{v}`"))?;
    anyhow::ensure!(n > 0, "SFFNET_THREADS must be a positive integer, got `{v}`");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|()| run(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
