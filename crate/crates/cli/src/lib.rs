//! Command-line front end for `rectm`.
//!
//! Exit status: 0 on success (rows may still be flagged), 1 when output
//! cannot be written, 2 on configuration errors, 3 on data errors.

pub mod commands;
pub mod config;
pub mod ingest;

use clap::Parser;
use thiserror::Error;

pub use config::{Command, Flags, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Output(_) => 1,
            Self::Config(_) => 2,
            Self::Data(_) => 3,
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_flags(flags).and_then(|c| commands::run(&c)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rectm: {e}");
            e.exit_code()
        }
    }
}
