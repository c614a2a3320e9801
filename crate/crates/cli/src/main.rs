use std::process::ExitCode;

use clap::Parser;
use ngram_lr_cli::{exit_code, run, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match exit_code(&e) {
            0 => ExitCode::SUCCESS,
            code => {
                eprintln!("error: {e:#}");
                ExitCode::from(code as u8)
            }
        },
    }
}
