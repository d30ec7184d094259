use thiserror::Error;

/// Errors surfaced by the command-line harness, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] spinmetro_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("validation failed: {0} check(s) did not pass")]
    ValidationFailed(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 0 success, 1 config error, 2 validation failure, 3 numeric contract
    /// violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::ValidationFailed(_) => 2,
            CliError::Core(e) => {
                if e.is_contract_violation()
                    || matches!(e, spinmetro_core::Error::NonDifferentiable { .. })
                {
                    3
                } else {
                    1
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
