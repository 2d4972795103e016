//! The `bmnn` command line: tensor completion runs, parameter sweeps and
//! synthetic data.
//!
//! Exit codes: 0 on success, 2 for bad arguments, 3 for I/O and format
//! errors, 4 when a solver diverges.

pub mod args;
pub mod complete;
pub mod error;
pub mod output;
pub mod problem;
pub mod sweep;
pub mod synth;

use std::ffi::OsString;

use clap::Parser;

use crate::args::{Cli, Command};
pub use crate::error::{CliError, CliResult};

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match &cli.command {
        Command::Complete(a) => complete::cmd_complete(a, command),
        Command::Sweep(a) => sweep::cmd_sweep(a, command),
        Command::Synth(a) => synth::cmd_synth(a, command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bmnn: {e}");
            e.exit_code()
        }
    }
}
