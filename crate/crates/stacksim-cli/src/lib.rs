//! Library half of the `stacksim` command-line tool: configuration
//! parsing, subcommand implementations, and report emission. The binary in
//! `main.rs` is a thin argument-parsing shell over this.

pub mod commands;
pub mod config;
pub mod output;

use stacksim_core::Error;

/// Process exit code for an error: 2 for configuration and domain
/// problems, 3 for trace-file problems, 1 for everything else.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) | Error::Domain(_) | Error::Capacity(_) => 2,
        Error::Format(_) | Error::Validation { .. } => 3,
        Error::Io(_) => 1,
    }
}
