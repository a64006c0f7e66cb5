use thiserror::Error;

use superrad::ErrorKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] superrad::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("plot: {0}")]
    Plot(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    /// Process exit code: 2 config, 3 capacity, 4 numerical, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Capacity => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => 1,
            },
            CliError::Io(_) | CliError::Plot(_) => 1,
        }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
