use std::path::Path;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, missing files, unknown pulse ids.
    #[error("{0}")]
    Input(String),

    /// The optimizer failed or did not reach the configured loss.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// The thermometry correction could not be solved reliably.
    #[error("{0}")]
    IllConditioned(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Optimization(_) => 3,
            CliError::IllConditioned(_) => 4,
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    /// Input error unless the root cause is an ill-conditioned correction.
    pub fn from_core(err: phononcp::Error) -> Self {
        Self::classify(err, CliError::Input)
    }

    /// Optimization error unless the root cause is an ill-conditioned
    /// correction.
    pub fn from_optimizer(err: phononcp::Error) -> Self {
        Self::classify(err, CliError::Optimization)
    }

    fn classify(err: phononcp::Error, fallback: fn(String) -> CliError) -> Self {
        match err.root() {
            phononcp::Error::IllConditioned { .. } => CliError::IllConditioned(format!(
                "{err}; the pulses cannot tell the window states apart"
            )),
            _ => fallback(err.to_string()),
        }
    }
}
