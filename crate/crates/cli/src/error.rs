use std::fmt;

/// Failure classes, each with a fixed process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or a refused plan. Exit 2.
    Usage(String),
    /// Unreadable, unwritable or unparsable input or output. Exit 3.
    Io(anyhow::Error),
    /// A run executed but produced invalid results or failed. Exit 1.
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(e: impl Into<anyhow::Error>) -> Self {
        CliError::Io(e.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io(e) => write!(f, "{e:#}"),
            CliError::Invalid(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attach context to I/O and parse failures.
pub trait IoContext<T> {
    fn io_context(self, what: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> IoContext<T> for Result<T, E> {
    fn io_context(self, what: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| CliError::Io(e.into().context(what())))
    }
}
