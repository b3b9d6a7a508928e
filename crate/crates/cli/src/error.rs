use std::fmt;

/// Failures mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Config does not parse or validate. Exit code 2.
    Schema {
        file: String,
        line: usize,
        col: usize,
        message: String,
    },
    /// The computation itself failed. Exit code 3.
    Numerical { context: String, source: rydfrag::Error },
    /// Reading the config or writing outputs failed. Exit code 1.
    Io { path: String, source: std::io::Error },
    /// Bad command-line usage. Exit code 2.
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema { .. } | CliError::Usage(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: impl fmt::Display, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_string(),
            source,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema { file, line, col, message } => write!(f, "{file}:{line}:{col}: error: {message}"),
            CliError::Numerical { context, source } => write!(f, "numerical failure in {context}: {source}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Attach a workflow step name to core errors.
pub trait Context<T> {
    fn step(self, context: &str) -> Result<T, CliError>;
}

impl<T> Context<T> for rydfrag::Result<T> {
    fn step(self, context: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numerical {
            context: context.to_string(),
            source,
        })
    }
}
