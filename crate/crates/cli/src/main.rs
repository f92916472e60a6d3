use std::process::ExitCode;

use clap::Parser;
use pqr_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pqr: {e}");
            exit_code(&e)
        }
    }
}
