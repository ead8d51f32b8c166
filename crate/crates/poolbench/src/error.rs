use std::fmt;
use std::io;
use std::path::PathBuf;

/// Process exit codes of the `poolbench` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Success = 0,
    Usage = 1,
    GradcheckFailed = 2,
    Diverged = 3,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io { path: PathBuf, source: io::Error },
    Core(poolbench_core::Error),
    Format { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl fmt::Display) -> Self {
        CliError::Format { path: path.into(), message: message.to_string() }
    }

    /// Every error that stops a command before it produces a verdict exits
    /// with the usage code; failed checks and diverged runs are reported
    /// through [`ExitCode`] by the commands themselves.
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::Usage
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Format { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            CliError::Core(e) => Some(e),
            _ => None,
        }
    }
}

impl From<poolbench_core::Error> for CliError {
    fn from(e: poolbench_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
