use std::path::PathBuf;

/// Everything a command can fail with, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] bpls_core::Error),
    #[error("{}: row {row}, column {col}: {message}", path.display())]
    Parse { path: PathBuf, row: usize, col: usize, message: String },
    #[error("{}: no column named `{name}`", path.display())]
    MissingColumn { path: PathBuf, name: String },
    #[error("{}: rows with missing cells: {}", path.display(), list(rows))]
    MissingCells { path: PathBuf, rows: Vec<usize> },
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("{}:{line}: {message}", path.display())]
    Config { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: malformed model artifact: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn list(rows: &[usize]) -> String {
    rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Artifact { path: path.into(), message: message.into() }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for I/O and file formats.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_)
            | CliError::Parse { .. }
            | CliError::MissingColumn { .. }
            | CliError::MissingCells { .. }
            | CliError::SchemaMismatch { .. }
            | CliError::Config { .. }
            | CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Artifact { .. } | CliError::Json(_) => 4,
        }
    }
}
