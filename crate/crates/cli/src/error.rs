use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", config_message(.line, .column, .message))]
    Config { line: Option<usize>, column: Option<usize>, message: String },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] nrrd_core::Error),
}

fn config_message(line: &Option<usize>, column: &Option<usize>, message: &str) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("config line {l}, column {c}: {message}"),
        (Some(l), None) => format!("config line {l}: {message}"),
        _ => format!("config: {message}"),
    }
}

impl CliError {
    pub(crate) fn config(message: impl Into<String>) -> Self {
        CliError::Config { line: None, column: None, message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
