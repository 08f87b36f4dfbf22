use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("{path}: malformed JSON: {source}")]
    Json { path: PathBuf, source: serde_json::Error },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{stage}: {source}")]
    Core { stage: String, source: regpoly::Error },

    /// A computed check exceeded its tolerance.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn core(stage: impl Into<String>, source: regpoly::Error) -> Self {
        CliError::Core {
            stage: stage.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Json { .. } | CliError::Invalid(_) => 2,
            CliError::Core { source, .. } if source.is_validation() => 2,
            CliError::Core { .. } | CliError::Check(_) => 3,
        }
    }

    /// Prefix every message with the input it came from.
    pub fn within(self, path: &std::path::Path) -> Self {
        match self {
            CliError::Core { stage, source } => CliError::Core {
                stage: format!("{}: {stage}", path.display()),
                source,
            },
            CliError::Invalid(m) => CliError::Invalid(format!("{}: {m}", path.display())),
            CliError::Check(m) => CliError::Check(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
