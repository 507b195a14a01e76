use std::fmt;

/// Failure classes, each with its own process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or missing inputs (exit 2).
    Config(String),
    /// Blow-up, eigensolver or other numerical failure (exit 3).
    Numerical(String),
    /// One or more verified claims failed (exit 4).
    Claims(Vec<String>),
    /// Filesystem trouble while writing outputs (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Claims(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Claims(list) => {
                write!(f, "{} claim(s) failed:", list.len())?;
                for c in list {
                    write!(f, "\n  - {c}")?;
                }
                Ok(())
            }
        }
    }
}

impl From<kgs_core::Error> for CliError {
    fn from(e: kgs_core::Error) -> Self {
        use kgs_core::Error::*;
        match e {
            Domain(_) | NoPeriodicWave { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
