use eac_reasoning::ReasonerError;

/// Command failure, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn input(context: &str, e: impl std::fmt::Display) -> CliError {
        CliError::Input(format!("{context}: {e}"))
    }
}

impl From<ReasonerError> for CliError {
    fn from(e: ReasonerError) -> Self {
        match e {
            ReasonerError::EmptyInstruction | ReasonerError::UnknownNames(_) => CliError::Input(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
