use pimfit::PimError;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Pim(#[from] PimError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for data problems, 4 for numerical
    /// failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
            CliError::Pim(e) => match e.root() {
                PimError::Config(_) => EXIT_CONFIG,
                PimError::Data(_) | PimError::Design(_) => EXIT_DATA,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}
