use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] aggar_core::Error),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 1 for file access, 2 for configuration problems, 3 for numeric failures, 4 for budget overruns.
    pub fn exit_code(&self) -> u8 {
        use aggar_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::Unsupported(_) | E::Boundary(_)) => 2,
            CliError::Core(E::NumericFailure { .. } | E::Degenerate(_) | E::Consistency(_)) => 3,
            CliError::Core(E::Budget { .. }) => 4,
            CliError::Io { .. } => 1,
        }
    }
}
