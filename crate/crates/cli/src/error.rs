use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Solver(#[from] hjvisc::Error),

    #[error("{0}")]
    NotConverged(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NotConverged(_) => 2,
            CliError::Solver(
                hjvisc::Error::NotConverged { .. } | hjvisc::Error::Diverged { .. },
            ) => 2,
            _ => 1,
        }
    }
}
