//! `kstab`: stability analysis of positive-definite kernels from the command line.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;

/// Exit status for malformed flags, specs or input files.
pub const EXIT_USAGE: u8 = 1;
/// Exit status for a computation refused by a guard or precondition.
pub const EXIT_GUARD: u8 = 2;

/// Failure of a single invocation.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Guard(String),
}

impl From<kstab_core::Error> for Failure {
    fn from(e: kstab_core::Error) -> Self {
        if e.is_guard() {
            Failure::Guard(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

const SYNOPSIS: &str = "usage: kstab <zoo|norm|single|boost|stability> [--spec PATH | --matrix JSON] \
[--horizon F | --horizons CSVLIST] [--step F] [--restarts N] [--seed N] [--eps F] \
[--enum-limit N] [--out-json PATH] [--out-csv PATH] [--quiet] [FUNCTION.csv]";

pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            eprintln!("{SYNOPSIS}");
            return EXIT_USAGE;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("{SYNOPSIS}");
            EXIT_USAGE
        }
        Err(Failure::Guard(msg)) => {
            eprintln!("error: {msg}");
            EXIT_GUARD
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()))
}
