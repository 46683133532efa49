//! Experiment runner around the `geoinv` library: declarative flat-key
//! configs, a problem catalog (synthetic fault benchmark plus two small
//! analytic families), chain/summary/lattice artifact writers, baseline
//! comparisons, a brute-force grid oracle, and a runtime self-check suite.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod oracle;
pub mod problems;
pub mod validate;

use std::fmt;

/// Process-level failure classes, mapped one-to-one onto exit codes by the
/// binary: configuration 2, numerical 3, exhausted search budgets 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Budget(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            CliError::Budget(msg) => write!(f, "budget exhausted: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Budget(_) => 4,
        }
    }
}

impl From<geoinv::Error> for CliError {
    fn from(e: geoinv::Error) -> Self {
        match e {
            geoinv::Error::InvalidParameter { .. } | geoinv::Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("io: {e}"))
    }
}
