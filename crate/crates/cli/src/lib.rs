//! Experiment commands behind the `msglance` binary.
//!
//! Each command reads its inputs, writes CSV/PNM artifacts into an output
//! directory and returns a short human summary. Errors carry the process
//! exit code: 1 usage, 2 input, 3 numerical abort.

pub mod commands;
pub mod config;

pub use commands::{cmd_ablate, cmd_fit, cmd_mask, cmd_metric, cmd_undersample, Metric, Suite};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("input: {0}")]
    Input(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<msglance::Error> for CliError {
    fn from(e: msglance::Error) -> Self {
        use msglance::Error as E;
        match e {
            E::NonFinite { .. } => CliError::Numerical(e.to_string()),
            E::InvalidArgument(_) => CliError::Usage(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
