use std::fmt;

/// Failure classes mapped one-to-one onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or missing configuration; exit code 1.
    Config(String),
    /// Failure while running a valid experiment; exit code 2.
    Runtime(String),
    /// A `verify` check found a violated property; exit code 3.
    Violation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::Violation(_) => 3,
        }
    }

    pub fn config(field: &str, detail: impl fmt::Display) -> Self {
        CliError::Config(format!("{field}: {detail}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
            CliError::Violation(msg) => write!(f, "verification failed: {msg}"),
        }
    }
}

impl From<brwre::Error> for CliError {
    fn from(e: brwre::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
