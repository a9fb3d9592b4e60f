// SPDX-License-Identifier: Apache-2.0

use std::process::ExitCode;

use clap::Parser;
use timing_games_cli::cli::Cli;

fn main() -> ExitCode {
    match timing_games_cli::run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
