use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] slr_core::Error),
    /// Unparseable file, unknown key, or a field that fails validation.
    #[error("config error: {0}")]
    Config(String),
    /// The command would clobber or misuse existing state.
    #[error("refused: {0}")]
    Refused(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Config(_) => "config",
            CliError::Refused(_) => "refused",
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Core(slr_core::Error::Io {
            context: context.to_string(),
            source: e,
        })
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
