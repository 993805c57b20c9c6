use sparsefit_core::Error as CoreError;

/// Failure of a CLI command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid flags or parameter values (exit 2).
    #[error("{0}")]
    Usage(String),
    /// Unreadable, malformed or unusable input data (exit 3).
    #[error("{0}")]
    Data(String),
    /// A solver stopped before converging (exit 4).
    #[error("{0}")]
    NonConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidParameter(_)
            | CoreError::FamilyMismatch { .. }
            | CoreError::TooManyPredictors { .. } => CliError::Usage(msg),
            CoreError::NonConvergence { .. } => CliError::NonConvergence(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
