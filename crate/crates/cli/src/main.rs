use std::process::ExitCode;

use aggar::Cli;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match aggar::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("aggar: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
