use std::process::ExitCode;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: clflow::Error,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for invalid configs, 1 for failures while running.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime { .. } | CliError::Io { .. } => ExitCode::from(1),
        }
    }
}

pub(crate) trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T>;
}

impl<T> Context<T> for clflow::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Runtime {
            context: what.into(),
            source,
        })
    }
}

impl<T> Context<T> for std::io::Result<T> {
    fn context(self, what: impl Into<String>) -> Result<T> {
        self.map_err(|source| CliError::Io {
            context: what.into(),
            source,
        })
    }
}
