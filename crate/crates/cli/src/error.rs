//! CLI failure modes mapped onto the exit-code contract:
//! 2 for configuration problems, 3 for numerical failures during a run.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(cbo_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "io failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<cbo_core::Error> for CliError {
    fn from(e: cbo_core::Error) -> Self {
        CliError::Numerical(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}
