//! Command-line front end. Every run writes `config.json` (the resolved
//! arguments) and `artifacts.json` (the produced files) into its output
//! directory.

pub mod args;
pub mod commands;

pub use args::{Cli, Command};
pub use commands::execute;

/// Process exit status for a failed run: 3 for filesystem problems, 2 otherwise.
pub fn exit_code(err: &trajeval_core::Error) -> i32 {
    if err.is_io() {
        3
    } else {
        2
    }
}
