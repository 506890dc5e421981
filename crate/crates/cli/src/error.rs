use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] sixstate::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(sixstate::Error::Infeasible(_) | sixstate::Error::ZeroCoincidence) => 2,
            _ => 1,
        }
    }
}
