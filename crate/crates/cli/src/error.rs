use thiserror::Error;
use tobit_core::TobitError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] TobitError),

    #[error("request to {url} failed: {message}")]
    Http { url: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Exit status; see `EXIT_CODES` in the help text.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 3,
            CliError::Http { .. } => 5,
            CliError::Core(e) => match e {
                TobitError::SingularDesign { .. }
                | TobitError::DegenerateVariance
                | TobitError::InsufficientData { .. }
                | TobitError::UnstableFilter { .. }
                | TobitError::NoLagCandidate { .. } => 4,
                TobitError::MalformedCsv { .. } | TobitError::EmptyPayload { .. } => 5,
                _ => 3,
            },
        }
    }
}
