use thiserror::Error;

/// Errors raised by the solvers. The CLI maps each variant to an exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid input `{field}`: {reason}")]
    Input { field: String, reason: String },
    #[error("numeric failure: {reason}{}", bracket_suffix(.bracket))]
    Numeric {
        reason: String,
        bracket: Option<(f64, f64)>,
    },
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn bracket_suffix(bracket: &Option<(f64, f64)>) -> String {
    match bracket {
        Some((lo, hi)) => format!(" (last bracket [{lo}, {hi}])"),
        None => String::new(),
    }
}

impl Error {
    pub fn input(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Input {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn numeric(reason: impl Into<String>, bracket: Option<(f64, f64)>) -> Self {
        Error::Numeric {
            reason: reason.into(),
            bracket,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
