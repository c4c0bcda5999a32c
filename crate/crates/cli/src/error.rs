use std::io;
use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration or the command line asks for something invalid.
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Read { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Engine(#[from] bossal::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// 2 for bad user input, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(e) if e.is_validation() => 2,
            _ => 1,
        }
    }
}
