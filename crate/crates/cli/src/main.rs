//! `lsnm`: fit location-scale noise models and infer causal directions from the command line.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

/// A decision was reached, or the command finished.
const EXIT_OK: u8 = 0;
/// Any error, including invalid arguments.
const EXIT_ERROR: u8 = 1;
/// `infer` ran but could not decide.
const EXIT_UNDECIDED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    EXIT_OK
                }
                _ => EXIT_ERROR,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_default_env()
        .init();

    let outcome = match &cli.command {
        Command::Fit(a) => commands::fit(&cli.global, a).map(|_| EXIT_OK),
        Command::Infer(a) => commands::infer(&cli.global, a).map(|decided| if decided { EXIT_OK } else { EXIT_UNDECIDED }),
        Command::Simulate(a) => commands::simulate(&cli.global, a).map(|_| EXIT_OK),
        Command::Benchmark(a) => commands::benchmark(&cli.global, a).map(|_| EXIT_OK),
        Command::EstimatorBench(a) => commands::estimator_bench(&cli.global, a).map(|_| EXIT_OK),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
