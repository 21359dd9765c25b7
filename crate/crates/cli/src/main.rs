//! `mcox`: whole-data Cox fits, moment-assisted subsampling, simulation
//! studies and timing benchmarks.
//!
//! Exit status 0 on success, 1 on input or usage errors, 2 when Newton-Raphson
//! does not converge (the partial result is still written).

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use mcox_core::CoxError;

use args::{Cli, Command};
use commands::Outcome;

const EXIT_INPUT: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INPUT),
            };
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("InvalidArgument: --threads must be at least 1");
            return ExitCode::from(EXIT_INPUT);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("InvalidArgument: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    }

    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, &cli.out),
        Command::Mcox(a) => commands::mcox(a, &cli.out),
        Command::Simulate(a) => commands::simulate(a, &cli.out),
        Command::Bench(a) => commands::bench(a, &cli.out),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(EXIT_NOT_CONVERGED),
        Err(e) => {
            eprintln!("{e}");
            match e {
                CoxError::NotConverged { .. } => ExitCode::from(EXIT_NOT_CONVERGED),
                _ => ExitCode::from(EXIT_INPUT),
            }
        }
    }
}
