use std::process::ExitCode;

use clap::Parser;
use sqst_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match sqst_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqst: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
