use std::fmt;

use zonecut::Error;

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const USAGE: u8 = 1;
pub const INPUT: u8 = 2;
pub const EMPTY_NETWORK: u8 = 3;
pub const INFEASIBLE: u8 = 4;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { code: USAGE, message: msg.into() }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Self { code: INPUT, message: msg.into() }
    }

    /// Prefixes the message with what was being done.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::EmptyNetwork => EMPTY_NETWORK,
            Error::Infeasible { .. } => INFEASIBLE,
            _ => INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(e.to_string())
    }
}
