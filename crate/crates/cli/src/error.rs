use rpbart::mixing::MixingError;
use rpbart::sampler::SamplerError;
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    #[error("{0}")]
    Validation(String),
    /// Unreadable or malformed input files (exit 3).
    #[error("{0}")]
    Ingestion(String),
    /// Numerical or sampler failure (exit 4).
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Ingestion(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn ingestion(msg: impl Into<String>) -> CliError {
    CliError::Ingestion(msg.into())
}

pub fn runtime(msg: impl std::fmt::Display) -> CliError {
    CliError::Runtime(msg.to_string())
}

/// Hyperparameter problems are validation errors naming the key, data
/// problems are ingestion errors, anything else is a runtime failure.
pub fn from_sampler(e: SamplerError) -> CliError {
    match e {
        SamplerError::Invalid { .. } => CliError::Validation(e.to_string()),
        SamplerError::Data(_) => CliError::Ingestion(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}

pub fn from_mixing(e: MixingError) -> CliError {
    match e {
        MixingError::Sampler(s) => from_sampler(s),
        MixingError::NotMixing => CliError::Validation(format!("{e}; this command needs a mixing archive (mode = mixing)")),
        MixingError::Data(_) | MixingError::Grid { .. } | MixingError::OutOfDomain { .. } | MixingError::Dimension { .. } => {
            CliError::Ingestion(e.to_string())
        }
    }
}
