use thiserror::Error;

/// CLI failure, mapped to a stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A statistical check failed or a computation did not converge.
    #[error("{0}")]
    Failed(String),

    /// Unreadable, malformed or inconsistent input.
    #[error("{0}")]
    Input(String),

    /// The requested estimator or check is not defined for this input.
    #[error("{0}")]
    Precondition(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Input(_) => 2,
            CliError::Precondition(_) => 3,
        }
    }
}

impl From<kshrink_core::Error> for CliError {
    fn from(e: kshrink_core::Error) -> Self {
        use kshrink_core::Error as E;
        match e {
            E::Precondition(_) => CliError::Precondition(e.to_string()),
            E::NoConvergence { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
