//! Implementation of the `tubeband` command-line tool: configuration,
//! CSV ingestion/emission, JSON summaries, and the subcommand logic.

pub mod commands;
pub mod config;
pub mod data;
pub mod json;

/// Command-level error with its process exit code: 2 for configuration and
/// contract problems, 1 for numerical failures.
#[derive(Debug)]
pub struct CliError {
    message: String,
    exit: u8,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        CliError { message, exit: 2 }
    }

    pub fn numerical(message: String) -> Self {
        CliError { message, exit: 1 }
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn exit_code(&self) -> u8 {
        self.exit
    }
}

impl From<tubeband::Error> for CliError {
    fn from(e: tubeband::Error) -> Self {
        match e.kind() {
            tubeband::error::ErrorKind::Contract => CliError::usage(e.to_string()),
            tubeband::error::ErrorKind::Numerical => CliError::numerical(e.to_string()),
        }
    }
}
