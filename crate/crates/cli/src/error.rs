use std::path::PathBuf;

use heatflux_core::Error as CoreError;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("inverse crime: {0} (pass --allow-inverse-crime to override)")]
    InverseCrime(String),
    #[error("solver diverged: {0}")]
    Divergence(String),
    #[error("optimizer failed: {0}")]
    Optimizer(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::InverseCrime(_) | CliError::Io { .. } => 2,
            CliError::Divergence(_) => 3,
            CliError::Optimizer(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Divergence { .. } => CliError::Divergence(e.to_string()),
            CoreError::DampingTooLarge(_) | CoreError::NotConverged { .. } => {
                CliError::Optimizer(e.to_string())
            }
            CoreError::Io(source) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Validation(other.to_string()),
        }
    }
}
