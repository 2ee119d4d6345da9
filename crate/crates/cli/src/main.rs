use std::process::ExitCode;

use clap::Parser;
use mintime_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mintime: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
