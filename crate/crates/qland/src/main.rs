use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = qland::cli::Cli::parse();
    match qland::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
