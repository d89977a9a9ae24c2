use polarlab_core::ErrorKind;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("resource cap: {0}")]
    Resource(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io(_) => 1,
        }
    }
}

impl From<polarlab_core::Error> for CliError {
    fn from(e: polarlab_core::Error) -> Self {
        let msg = e.to_string();
        match e.kind() {
            ErrorKind::Config => CliError::Config(msg),
            ErrorKind::Numerical => CliError::Numerical(msg),
            ErrorKind::Resource => CliError::Resource(msg),
            ErrorKind::Io => CliError::Io(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
