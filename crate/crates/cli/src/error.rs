use thiserror::Error;

/// Errors surfaced by the commands, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input files: exit code 2.
    #[error("{0}")]
    Input(String),
    /// Anything else: exit code 1.
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) trait Context<T> {
    fn input(self, what: &str) -> Result<T>;
    fn internal(self, what: &str) -> Result<T>;
}

impl<T, E: std::fmt::Display> Context<T> for std::result::Result<T, E> {
    fn input(self, what: &str) -> Result<T> {
        self.map_err(|e| CliError::Input(format!("{what}: {e}")))
    }

    fn internal(self, what: &str) -> Result<T> {
        self.map_err(|e| CliError::Internal(format!("{what}: {e}")))
    }
}
