use std::process::ExitCode;

use clap::Parser;
use szego_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("szego: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
