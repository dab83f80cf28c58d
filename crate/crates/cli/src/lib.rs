//! Orchestration layer: configuration parsing, the four pipeline commands
//! (`analyze`, `solve`, `verify`, `export`), and the invariant suite they
//! share with the acceptance tests.

pub mod commands;
pub mod config;
pub mod report;
pub mod suite;

use std::fmt;

/// Top-level command failure, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Configuration or validation problem (exit 2).
    Config(String),
    /// The solve pipeline produced no solutions (exit 3).
    NoSolutions(String),
    /// Internal invariant violation (exit 4).
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NoSolutions(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::NoSolutions(m) => write!(f, "no solutions: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<rotorbits::Error> for CliError {
    fn from(e: rotorbits::Error) -> Self {
        use rotorbits::Error as E;
        match e {
            E::UnknownSystem(_) | E::InvalidSystem(_) | E::InvalidConfig(_) => {
                CliError::Config(e.to_string())
            }
            E::EnergyBelowMstar { .. } => CliError::Config("M <= M*".to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o failure: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
