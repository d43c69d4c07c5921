use std::fmt;
use std::process::ExitCode;

/// Failure of a command, carrying the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input (exit 2).
    Input(String),
    /// A solver failed numerically (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Input(_) => ExitCode::from(2),
            CliError::Numeric(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Numeric(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<sigdesign::error::Error> for CliError {
    fn from(e: sigdesign::error::Error) -> Self {
        use sigdesign::error::Error;
        match e {
            Error::Numeric { .. } | Error::Invariant(_) => CliError::Numeric(e.to_string()),
            Error::Domain(_) | Error::Range(_) | Error::Input { .. } | Error::Resource(_) => {
                CliError::Input(e.to_string())
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
