use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] etapair_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(etapair_core::Error::NotConverged(_)) => "not_converged",
            CliError::Core(_) => "solver",
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(etapair_core::Error::NotConverged(_)) => 3,
            _ => 1,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> serde_json::Value {
        serde_json::json!({
            "status": "error",
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
