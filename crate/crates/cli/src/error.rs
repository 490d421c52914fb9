use std::path::PathBuf;

/// CLI failures and their exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Config parse or validation failure, anchored at a line.
    #[error("{file}:{line}:{column}: {field}: {message}")]
    Config {
        file: String,
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{task}: {source}")]
    Task {
        task: String,
        #[source]
        source: barrier_lab_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn task(task: impl Into<String>, source: barrier_lab_core::Error) -> Self {
        CliError::Task {
            task: task.into(),
            source,
        }
    }

    /// `2` for config and usage errors, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
