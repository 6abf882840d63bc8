use rabi_dimer::Error;

/// Failure classes, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("truncation check failed: {0}")]
    Truncation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Truncation(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSites(_)
            | Error::InvalidSite { .. }
            | Error::InvalidParameter(_)
            | Error::Parse(_)
            | Error::DimensionOverflow { .. }
            | Error::FockOutOfRange { .. }
            | Error::DenseLimit { .. }
            | Error::CheckpointMismatch { .. } => CliError::Config(e.to_string()),
            Error::TruncationTail { .. } => CliError::Truncation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Numerical(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("serialization: {e}"))
    }
}
