use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigErrors;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n{0}")]
    Config(#[from] ConfigErrors),

    #[error("{0}")]
    Usage(String),

    #[error("step `{step}` failed: {source}")]
    Step {
        step: &'static str,
        #[source]
        source: nisakns_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that went wrong
    /// while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Attaches the scenario step name to a core error.
pub trait StepContext<T> {
    fn step(self, step: &'static str) -> Result<T, CliError>;
}

impl<T> StepContext<T> for nisakns_core::Result<T> {
    fn step(self, step: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Step { step, source })
    }
}
