use std::process::ExitCode;

use clap::Parser;
use irfcorr_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match irfcorr_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irfcorr: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
