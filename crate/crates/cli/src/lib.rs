//! Experiment front end for the `eharq` crate: configuration, solve,
//! simulate, parameter sweeps and the acceptance checks.

pub mod cli;
pub mod commands;
pub mod config;
pub mod format;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const INFEASIBLE: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const BAD_CONFIG: i32 = 4;
    pub const MULTICHAIN: i32 = 5;
    pub const IO: i32 = 6;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("policy induces several recurrent classes: {0}")]
    Multichain(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::BAD_CONFIG,
            CliError::Infeasible(_) => exit::INFEASIBLE,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Multichain(_) => exit::MULTICHAIN,
            CliError::Io(_) => exit::IO,
        }
    }
}
