use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] blocktoep::Error),

    /// A check ran to completion and its criterion did not hold.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadConfig(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) | CliError::CheckFailed(_) => 2,
        }
    }
}
