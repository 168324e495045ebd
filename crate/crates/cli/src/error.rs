use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] seqcrypt_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for unusable input, 1 for failures during computation or IO.
    pub fn exit_code(&self) -> u8 {
        use seqcrypt_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(E::InvalidArgument(_) | E::Inadmissible { .. }) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
