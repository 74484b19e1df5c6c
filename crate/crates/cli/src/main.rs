//! Command-line harness for the grounding engine.
//!
//! Exit codes: 0 success, 1 error, 2 for a search that produced a
//! degenerate (flagged) segment.

mod commands;
mod opts;
mod report;

use clap::error::ErrorKind;
use clap::Parser;

use crate::opts::Cli;

fn main() {
    // clap would exit(2) on usage errors; 2 is reserved for degenerate
    // groundings, so usage problems map to 1 instead.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
