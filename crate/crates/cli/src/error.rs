use alearn::dataset::DatasetError;
use alearn::engine::EngineError;
use alearn::model::ModelError;
use alearn::report::ReportError;

/// Failure with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Flags parse but do not make sense together. Exit 2.
    #[error("{0}")]
    Usage(String),
    /// Dataset missing, unreadable or too small. Exit 3.
    #[error("{0}")]
    Data(String),
    /// Training produced a non-finite loss. Exit 4.
    #[error("{0}")]
    Diverged(String),
    /// Gradient check over threshold. Exit 5.
    #[error("{0}")]
    GradientBreach(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged(_) => 4,
            CliError::GradientBreach(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteLoss => CliError::Diverged(e.to_string()),
            ModelError::InvalidHyper(_) => CliError::Usage(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) => CliError::Usage(e.to_string()),
            EngineError::Dataset(d) => d.into(),
            EngineError::Model(m) => m.into(),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
